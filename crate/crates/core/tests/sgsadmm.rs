use nalgebra::DMatrix;
use sgs_admm::blockalg::{min_eig, BlockOperator, BlockStructure};
use sgs_admm::imipadmm::{self, TwoBlockSolver, TwoBlockState};
use sgs_admm::instances::{oracle_solve, InstancePreset};
use sgs_admm::sgs::sgs_operator;
use sgs_admm::sgsadmm::{
    self, construct_operators, kappa, transport_ratios, MultiBlockConfig, MultiBlockSolver, ProxMode,
    SweepInexactness,
};
use sgs_admm::ToleranceSchedule;

fn preset(name: &str) -> sgs_admm::ProblemSpec {
    InstancePreset::by_name(name).unwrap().generate().unwrap()
}

#[test]
fn kappa_single_block() {
    let h = BlockOperator::symmetric(BlockStructure::single(1).unwrap(), DMatrix::from_element(1, 1, 4.0)).unwrap();
    assert!((kappa(&h).unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn single_blocks_have_no_sgs_part() {
    let spec = InstancePreset::Tiny.generate().unwrap();
    let cfg = MultiBlockConfig::new(&spec, 1.0, ProxMode::Zero).unwrap();
    let ops = construct_operators(&spec, &cfg).unwrap();
    assert_eq!(ops.s_sgs.matrix(), cfg.s_tilde.matrix());
    assert_eq!(ops.t_sgs.matrix(), cfg.t_tilde.matrix());
}

#[test]
fn single_blocks_reduce_to_two_block_method() {
    let spec = preset("lasso1");
    let mut cfg = MultiBlockConfig::new(&spec, 1.0, ProxMode::Zero).unwrap();
    cfg.tau = 1.3;
    let mut multi = MultiBlockSolver::new(&spec, cfg.clone()).unwrap();
    let mut two = TwoBlockSolver::new(&spec, multi.embedded_config()).unwrap();
    let mut a = TwoBlockState::zeros(&spec).unwrap();
    let mut b = a.clone();
    for _ in 0..40 {
        a = multi.iterate(&a).unwrap().state;
        b = two.step(&b).unwrap();
        assert!((&a.x - &b.x).amax() < 1e-12 && (&a.z - &b.z).amax() < 1e-12);
    }
}

#[test]
fn m_sgs_is_m_tilde_plus_sgs() {
    let spec = preset("threeby2");
    let cfg = MultiBlockConfig::new(&spec, 1.0, ProxMode::Auto).unwrap();
    let ops = construct_operators(&spec, &cfg).unwrap();
    let direct = ops.m_tilde.matrix() + sgs_operator(&ops.m_tilde).unwrap().matrix();
    let rel = (&direct - ops.m_sgs.matrix()).norm() / direct.norm();
    assert!(rel < 1e-12, "{rel}");
    let expect = spec.f().sigma_hat().matrix() + spec.aat() * cfg.sigma + ops.s_sgs.matrix();
    assert!((&expect - ops.m_sgs.matrix()).norm() / expect.norm() < 1e-12);
}

#[test]
fn reduction_holds_in_every_inexact_mode() {
    let spec = preset("threeby2");
    for inexact in [
        SweepInexactness::Exact,
        SweepInexactness::Tilted { seed: 11 },
        SweepInexactness::ConjugateGradient,
    ] {
        let mut cfg = MultiBlockConfig::new(&spec, 1.0, ProxMode::Auto).unwrap();
        cfg.cross_check = true;
        cfg.inexact = inexact;
        cfg.eps_tilde_schedule = ToleranceSchedule::geometric(1e-2, 0.7).unwrap();
        cfg.max_iter = 100;
        cfg.stop_tol = 0.0;
        let out = sgsadmm::solve(&spec, cfg, TwoBlockState::zeros(&spec).unwrap()).unwrap();
        assert_eq!(out.iterations, 100);
        for rec in &out.trace[1..] {
            let res = rec.sweep.as_ref().unwrap().reduction_residual.unwrap();
            assert!(res <= 1e-9, "{inexact}: k={} residual {res:e}", rec.k);
        }
    }
}

#[test]
fn certificate_transport_bound() {
    for name in ["threeby2", "stress"] {
        let spec = preset(name);
        let mode = if name == "stress" { ProxMode::Stress } else { ProxMode::Auto };
        let mut cfg = MultiBlockConfig::new(&spec, 1.0, mode).unwrap();
        cfg.inexact = SweepInexactness::Tilted { seed: 5 };
        let sched = ToleranceSchedule::geometric(1e-1, 0.8).unwrap();
        cfg.eps_tilde_schedule = sched;
        let mut solver = MultiBlockSolver::new(&spec, cfg).unwrap();
        let ops = solver.operators().clone();
        let out = solver.solve(TwoBlockState::zeros(&spec).unwrap()).unwrap();
        assert!(out.converged, "{name}");
        for (k, ex, ey) in transport_ratios(&out.trace, &ops, &sched) {
            assert!(ex <= 1e-12 && ey <= 1e-12, "{name} k={k}: {ex:e} {ey:e}");
        }
    }
}

#[test]
fn stress_prox_is_indefinite_and_converges() {
    let spec = preset("stress");
    let cfg = MultiBlockConfig::new(&spec, 1.0, ProxMode::Stress).unwrap();
    assert!(min_eig(&cfg.s_tilde).unwrap() < 0.0);
    assert!(min_eig(&cfg.t_tilde).unwrap() < 0.0);
    let kkt = oracle_solve(&spec, 1e-10).unwrap();
    let out = sgsadmm::solve(&spec, cfg, TwoBlockState::zeros(&spec).unwrap()).unwrap();
    assert!(out.converged);
    assert!((&out.state.x - &kkt.x).amax() < 1e-5);
}

#[test]
fn sgs_converges_to_oracle_exact_and_tilted() {
    let spec = preset("threeby2");
    let kkt = oracle_solve(&spec, 1e-10).unwrap();
    for (inexact, tol) in [
        (SweepInexactness::Exact, 1e-6),
        (SweepInexactness::Tilted { seed: 1 }, 1e-5),
    ] {
        for tau in [1.0, 1.618] {
            let mut cfg = MultiBlockConfig::new(&spec, 1.0, ProxMode::Auto).unwrap();
            cfg.tau = tau;
            cfg.inexact = inexact;
            cfg.eps_tilde_schedule = ToleranceSchedule::geometric(1e-2, 0.5).unwrap();
            let out = sgsadmm::solve(&spec, cfg, TwoBlockState::zeros(&spec).unwrap()).unwrap();
            assert!(out.converged);
            assert!(out.final_residual() <= 1e-8);
            assert!((&out.state.x - &kkt.x).amax() < tol);
            assert!((&out.state.y - &kkt.y).amax() < tol);
            assert!((&out.state.z - &kkt.z).amax() < tol);
        }
    }
}

#[test]
fn inadmissible_multi_block_terms_are_named() {
    let spec = preset("threeby2");
    let mut cfg = MultiBlockConfig::new(&spec, 1.0, ProxMode::Zero).unwrap();
    cfg.s_tilde = spec.f().sigma_hat().scale(-0.6);
    let err = construct_operators(&spec, &cfg).unwrap_err().to_string();
    assert!(err.contains("S̃"), "{err}");
}

#[test]
fn prox_mode_parsing() {
    assert_eq!("auto".parse::<ProxMode>().unwrap(), ProxMode::Auto);
    assert_eq!("shift:0.5".parse::<ProxMode>().unwrap(), ProxMode::Shift(0.5));
    assert!("shift:x".parse::<ProxMode>().is_err());
    assert_eq!("cg".parse::<SweepInexactness>().unwrap(), SweepInexactness::ConjugateGradient);
    assert_eq!("tilt:4".parse::<SweepInexactness>().unwrap(), SweepInexactness::Tilted { seed: 4 });
    let _ = imipadmm::DEFAULT_TAU;
}
