//! One pass/fail line per acceptance criterion. Run with `--nocapture` to
//! see the table; the test fails if any criterion fails.

use std::time::Instant;

use sgs_admm::imipadmm::{step_constants, ProxMode, TwoBlockState};
use sgs_admm::instances::{InstancePreset, PRESET_NAMES};
use sgs_admm::sgsadmm::{MultiBlockConfig, MultiBlockSolver, SweepInexactness};
use sgs_admm::trials::{
    constants_trials, convergence_grid, error_bound_trials, hat_identity_trials, run_grid, sweep_equivalence_trials,
    GridResult,
};
use sgs_admm::verify::{check_gradient_monotonicity, Check, LedgerRow};
use sgs_admm::{Execution, ToleranceSchedule};

const EXEC: Execution = Execution::Parallel;

struct Report {
    lines: Vec<(usize, bool, String)>,
}

impl Report {
    fn add(&mut self, n: usize, pass: bool, detail: String) {
        println!("criterion {n:>2}: {}  {detail}", if pass { "PASS" } else { "FAIL" });
        self.lines.push((n, pass, detail));
    }
}

fn rows_of<'a>(res: &'a [GridResult], checks: &'a [Check]) -> impl Iterator<Item = &'a LedgerRow> + 'a {
    res.iter().flat_map(|r| r.rows.iter()).filter(move |row| checks.contains(&row.check))
}

fn tally<'a>(rows: impl Iterator<Item = &'a LedgerRow>) -> (usize, usize) {
    rows.fold((0, 0), |(n, f), r| (n + 1, f + usize::from(!r.pass)))
}

/// Cross-checked sGS run of exactly `iters` iterations; returns the number
/// of iterations with a recorded reduction gap and the largest gap.
fn reduction_run(preset: &str, prox: ProxMode, inexact: SweepInexactness, iters: usize) -> (usize, f64) {
    let spec = InstancePreset::by_name(preset).unwrap().generate().unwrap();
    let mut cfg = MultiBlockConfig::new(&spec, 1.0, prox).unwrap();
    cfg.cross_check = true;
    cfg.inexact = inexact;
    cfg.stop_tol = 0.0;
    cfg.max_iter = iters;
    if inexact != SweepInexactness::Exact {
        cfg.eps_tilde_schedule = ToleranceSchedule::geometric(1e-2, 0.9).unwrap();
    }
    let out = MultiBlockSolver::new(&spec, cfg).unwrap().solve(TwoBlockState::zeros(&spec).unwrap()).unwrap();
    let gaps: Vec<f64> = out.trace.iter().filter_map(|r| r.sweep.as_ref()?.reduction_residual).collect();
    (gaps.len(), gaps.iter().copied().fold(0.0, f64::max))
}

#[test]
fn acceptance() {
    let start = Instant::now();
    let mut rep = Report { lines: Vec::new() };

    let s = sweep_equivalence_trials(200, 101, EXEC);
    rep.add(1, s.all_passed(), format!("sGS sweep = direct minimizer: {}/{} within 1e-8, worst gap {:.1e}", s.trials - s.failures, s.trials, s.worst));

    let s = hat_identity_trials(200, 102, EXEC);
    rep.add(2, s.all_passed(), format!("Ĥ = H + sGS(H), Ĥ ≻ 0: {}/{}, worst relative gap {:.1e}", s.trials - s.failures, s.trials, s.worst));

    let s = error_bound_trials(1000, 103, EXEC);
    rep.add(3, s.all_passed(), format!("tilt error bound: {}/{}, max lhs - rhs {:.2e}", s.trials - s.failures, s.trials, s.worst));

    let s = constants_trials(50, 4, 104, EXEC);
    let (a, ah, b) = step_constants(1.0);
    let regression = (a - 0.75).abs() <= 1e-15 && (ah - 0.25).abs() <= 1e-15 && (b - 0.5).abs() <= 1e-15;
    rep.add(
        4,
        s.all_passed() && regression,
        format!("α, α̂ ∈ (0,1), β > 0, F, G ≻ 0: {}/{} configs over 50 τ; τ=1 regression {}", s.trials - s.failures, s.trials, if regression { "exact" } else { "off" }),
    );

    let mut red_ok = true;
    let mut red_detail = Vec::new();
    for (label, inexact) in [
        ("exact", SweepInexactness::Exact),
        ("tilted", SweepInexactness::Tilted { seed: 5 }),
        ("cg", SweepInexactness::ConjugateGradient),
    ] {
        let (n, worst) = reduction_run("threeby2", ProxMode::Auto, inexact, 100);
        red_ok &= n == 100 && worst <= 1e-9;
        red_detail.push(format!("{label} {n} its max {worst:.1e}"));
    }
    rep.add(5, red_ok, format!("multi-block = two-block iterates on threeby2: {}", red_detail.join(", ")));

    let grid = run_grid(&convergence_grid(), EXEC).unwrap();

    let (n, f) = tally(rows_of(&grid, &[Check::TransportX, Check::TransportY]));
    rep.add(6, n > 0 && f == 0, format!("certificate transport: {}/{} rows over the sGS runs", n - f, n));

    let bad: Vec<String> = grid
        .iter()
        .filter(|r| !(r.converged && r.final_residual <= 1e-8 && r.iterations <= 10_000 && r.oracle_gap <= 1e-5))
        .map(|r| r.case.to_string())
        .collect();
    let max_its = grid.iter().map(|r| r.iterations).max().unwrap_or(0);
    let max_gap = grid.iter().map(|r| r.oracle_gap).fold(0.0, f64::max);
    rep.add(
        7,
        bad.is_empty(),
        format!("convergence grid: {}/{} runs, max {} its, max oracle gap {:.1e}{}", grid.len() - bad.len(), grid.len(), max_its, max_gap, if bad.is_empty() { String::new() } else { format!(", failing: {}", bad.join("; ")) }),
    );

    let (n, f) = tally(rows_of(&grid, &[Check::Key, Check::Residual]));
    rep.add(8, n > 0 && f == 0, format!("key and residual inequalities: {}/{} rows", n - f, n));

    let (nf, ff) = tally(rows_of(&grid, &[Check::Fejer, Check::XiPhi]));
    let (nm, fm) = tally(rows_of(&grid, &[Check::Monotone]));
    let (nl, fl) = tally(rows_of(&grid, &[Check::LimitPhi]));
    rep.add(
        9,
        nf > 0 && nm > 0 && nl == grid.len() && ff + fm + fl == 0,
        format!("ξ bound {}/{}, monotone (ε ≡ 0) {}/{}, limit φ {}/{}", nf - ff, nf, nm - fm, nm, nl - fl, nl),
    );

    let stress: Vec<&GridResult> = grid.iter().filter(|r| r.case.preset == "stress").collect();
    let indefinite = stress.iter().all(|r| r.prox_min_eig < 0.0);
    let min_eig = stress.iter().map(|r| r.prox_min_eig).fold(f64::INFINITY, f64::min);
    let stress_ok = stress.iter().all(|r| r.converged && r.oracle_gap <= 1e-5 && r.ledger.failures == 0);
    let (n_red, worst_red) = reduction_run("stress", ProxMode::Stress, SweepInexactness::Tilted { seed: 6 }, 100);
    rep.add(
        10,
        !stress.is_empty() && indefinite && stress_ok && n_red == 100 && worst_red <= 1e-9,
        format!("stress preset, λ_min(S̃) = {min_eig:.3}: {} runs clean on checks 6-9, cross-check max {worst_red:.1e}", stress.len()),
    );

    let mut total = 0;
    let mut failed = 0;
    for name in PRESET_NAMES {
        let spec = InstancePreset::by_name(name).unwrap().generate().unwrap();
        for h in [spec.f(), spec.g()] {
            let rows = check_gradient_monotonicity(h, 10_000, 105, EXEC);
            total += rows.len();
            failed += rows.iter().filter(|r| !r.pass).count();
        }
    }
    rep.add(11, failed == 0, format!("smooth-function monotonicity inequality: {}/{} triples", total - failed, total));

    let elapsed = start.elapsed();
    println!("acceptance finished in {:.2}s", elapsed.as_secs_f64());
    let failing: Vec<usize> = rep.lines.iter().filter(|l| !l.1).map(|l| l.0).collect();
    assert_eq!(rep.lines.len(), 11);
    assert!(failing.is_empty(), "failing criteria: {failing:?}");
}
