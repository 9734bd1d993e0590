//! Same workloads through `Execution::Sequential` and `Execution::Parallel`.
//! Build with `--no-default-features` to see the sequential fallback take
//! both paths.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sgs_admm::imipadmm::{InexactMode, TwoBlockConfig, TwoBlockState};
use sgs_admm::instances::{oracle_solve_with, InstancePreset};
use sgs_admm::trials::{convergence_grid, error_bound_trials, run_grid, sweep_equivalence_trials};
use sgs_admm::verify::Ledger;
use sgs_admm::{imipadmm, Execution, ToleranceSchedule};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn grid(c: &mut Criterion) {
    let cases = convergence_grid();
    let mut g = c.benchmark_group("convergence_grid");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| black_box(run_grid(&cases, exec).unwrap())));
    }
    g.finish();
}

fn trials(c: &mut Criterion) {
    let mut g = c.benchmark_group("monte_carlo");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new("sweep_equivalence_200", name), &exec, |b, &e| {
            b.iter(|| black_box(sweep_equivalence_trials(200, 1, e)))
        });
        g.bench_with_input(BenchmarkId::new("error_bound_1000", name), &exec, |b, &e| {
            b.iter(|| black_box(error_bound_trials(1000, 2, e)))
        });
    }
    g.finish();
}

fn ledger(c: &mut Criterion) {
    let spec = InstancePreset::by_name("stress").unwrap().generate().unwrap();
    let anchor = oracle_solve_with(&spec, 1e-12, Execution::Sequential).unwrap();
    let mut cfg = TwoBlockConfig::new(&spec, 5.0);
    cfg.inexact = InexactMode::Tilted { seed: 1 };
    cfg.eps_schedule = ToleranceSchedule::geometric(1e-2, 0.9).unwrap();
    let out = imipadmm::solve(&spec, cfg.clone(), TwoBlockState::zeros(&spec).unwrap()).unwrap();
    let states = out.states();
    let ledger = Ledger::new(&spec, &cfg, &anchor).unwrap();
    let mut g = c.benchmark_group(format!("ledger_{}_iterations", out.iterations));
    g.sample_size(20);
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| black_box(ledger.run(&states, exec).unwrap())));
    }
    g.finish();
}

criterion_group!(benches, grid, trials, ledger);
criterion_main!(benches);
