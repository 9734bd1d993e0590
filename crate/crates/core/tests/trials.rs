use sgs_admm::trials::{
    constants_trials, convergence_grid, error_bound_trials, hat_identity_trials, run_grid, sweep_equivalence_trials,
};
use sgs_admm::verify::Check;
use sgs_admm::Execution;

#[test]
fn sweep_matches_enumerated_minimizer() {
    let s = sweep_equivalence_trials(200, 1, Execution::Parallel);
    assert!(s.all_passed(), "{s:?}");
}

#[test]
fn hat_identity_holds() {
    let s = hat_identity_trials(200, 2, Execution::Parallel);
    assert!(s.all_passed(), "{s:?}");
}

#[test]
fn tilt_error_bound_holds() {
    let s = error_bound_trials(1000, 3, Execution::Parallel);
    assert!(s.all_passed(), "{s:?}");
    assert!(s.worst < 0.0);
}

#[test]
fn constants_are_positive() {
    let s = constants_trials(50, 4, 4, Execution::Parallel);
    assert!(s.all_passed(), "{s:?}");
}

#[test]
fn grid_converges_with_clean_ledgers() {
    let res = run_grid(&convergence_grid(), Execution::Parallel).unwrap();
    assert_eq!(res.len(), 144);
    for r in &res {
        assert!(r.converged && r.final_residual <= 1e-8, "{}", r.case);
        assert!(r.oracle_gap <= 1e-5, "{}: {:e}", r.case, r.oracle_gap);
        assert_eq!(r.ledger.failures, 0, "{}", r.case);
        assert!(r.rows.iter().any(|row| row.check == Check::LimitPhi));
        if r.case.preset == "stress" {
            assert!(r.prox_min_eig < 0.0);
        }
    }
}
