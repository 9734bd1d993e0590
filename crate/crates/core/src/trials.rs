//! Randomized property trials and the solver run driver.
//!
//! The trial functions draw independent random cases from a seed, evaluate
//! them with [`map_range`] and fold the outcomes into a [`TrialSummary`].
//! [`run`] turns a [`RunSettings`] into either solver and [`verify_run`]
//! evaluates the full ledger of a finished run; both are shared by the grid
//! sweep, the acceptance suite and the command line.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::blockalg::{min_eig_mat, split, BlockOperator, BlockStructure, BlockVector};
use crate::error::{Error, Result};
use crate::imipadmm::{
    self, derive_constants, step_constants, InexactMode, ProxMode, SolveOutcome, TwoBlockConfig, TwoBlockState,
    DEFAULT_TAU,
};
use crate::instances::{
    gaussian_vector, generate, oracle_prox_quadratic, oracle_solve_with, random_psd, random_spd, InstancePreset,
    KktPoint, ProxKind, RandomPreset, PRESET_NAMES,
};
use crate::model::{MajorizerMode, MinorizerMode, ProblemSpec, ProxFriendlyFunction};
use crate::parallel::{map_range, map_slice, Execution};
use crate::schedule::ToleranceSchedule;
use crate::sgs::{hat_operator, sgs_operator, sgs_sweep, theorem_iv_bound, tilt_vector, QuadraticBlockObjective, SweepTolerances};
use crate::sgsadmm::{ConstructedOperators, MultiBlockConfig, MultiBlockSolver, SweepInexactness};
use crate::verify::{limit_anchor_row, multi_block_rows, summarize, LedgerRow, LedgerSummary, Ledger};

/// Outcome of a batch of independent trials.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub trials: usize,
    pub failures: usize,
    /// Worst value of the per-trial statistic (meaning depends on the trial).
    pub worst: f64,
}

impl TrialSummary {
    fn fold(outcomes: Vec<Result<(bool, f64)>>) -> Self {
        let mut s = Self { trials: outcomes.len(), failures: 0, worst: f64::NEG_INFINITY };
        for o in outcomes {
            match o {
                Ok((pass, stat)) => {
                    if !pass {
                        s.failures += 1;
                    }
                    if stat.is_nan() || stat > s.worst {
                        s.worst = stat;
                    }
                }
                Err(_) => s.failures += 1,
            }
        }
        s
    }

    pub fn all_passed(&self) -> bool {
        self.trials > 0 && self.failures == 0
    }
}

fn trial_rng(seed: u64, t: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Random self-adjoint `H ⪰ 0` with `s` blocks of dims in `1..=max_dim` and
/// positive definite diagonal blocks. One case in four is rank deficient.
pub fn random_block_operator(s: usize, max_dim: usize, rng: &mut impl Rng) -> Result<BlockOperator> {
    let dims: Vec<usize> = (0..s).map(|_| rng.random_range(1..=max_dim)).collect();
    let st = BlockStructure::new(dims)?;
    let n = st.total_dim();
    loop {
        let mat = if n > s && rng.random_range(0..4) == 0 {
            random_psd(n, n - 1, (0.1, 10.0), rng)
        } else {
            random_spd(n, (0.1, 10.0), rng)
        };
        let diag_ok = (0..s).all(|i| {
            let r = st.range(i);
            min_eig_mat(&mat.view((r.start, r.start), (r.len(), r.len())).into_owned()) > 1e-3
        });
        if diag_ok {
            return BlockOperator::symmetric(st, mat);
        }
    }
}

/// Random `θ` on block 1: zero, `ℓ1` or a box, by `kind % 3`.
pub fn random_theta(kind: usize, dim: usize, rng: &mut impl Rng) -> Result<ProxFriendlyFunction> {
    match kind % 3 {
        0 => Ok(ProxFriendlyFunction::zero(dim)),
        1 => ProxFriendlyFunction::l1(dim, rng.random_range(0.1..1.5)),
        _ => {
            let lo = (0..dim).map(|_| -rng.random_range(0.2..1.0)).collect();
            let hi = (0..dim).map(|_| rng.random_range(0.2..1.0)).collect();
            ProxFriendlyFunction::box_indicator(lo, hi)
        }
    }
}

fn random_tolerances(st: &BlockStructure, scale: f64, rng: &mut impl Rng) -> Result<SweepTolerances> {
    let n = st.total_dim();
    SweepTolerances::new(
        BlockVector::new(st.clone(), gaussian_vector(n, rng) * scale)?,
        BlockVector::new(st.clone(), gaussian_vector(n, rng) * scale)?,
    )
}

/// One sweep versus the enumerated minimizer of the equivalent proximal
/// problem `θ(u_1) + h(u) + 1/2||u - u⁻||²_{sGS(H)} - <d, u>`.
/// Statistic: max coordinate gap; passes at `1e-8`.
pub fn sweep_equivalence_trials(trials: usize, seed: u64, exec: Execution) -> TrialSummary {
    TrialSummary::fold(map_range(exec, trials, |t| {
        let mut rng = trial_rng(seed, t);
        let h = random_block_operator(2 + t % 3, 4, &mut rng)?;
        let st = h.row_structure().clone();
        let n = st.total_dim();
        let theta = random_theta(t / 2, st.block_dim(0), &mut rng)?;
        let b = BlockVector::new(st.clone(), gaussian_vector(n, &mut rng) * 2.0)?;
        let u_prev = BlockVector::new(st.clone(), gaussian_vector(n, &mut rng))?;
        let tols = if t % 2 == 0 {
            SweepTolerances::zeros(st.clone())
        } else {
            random_tolerances(&st, 0.1, &mut rng)?
        };
        let obj = QuadraticBlockObjective::new(h.clone(), b.clone(), theta.clone())?;
        let swept = sgs_sweep(&obj, &u_prev, &tols)?.u_plus;

        let hat = hat_operator(&h)?;
        let d = tilt_vector(&tols, &split(&h)?)?;
        let q = b.data() + sgs_operator(&h)?.matrix() * u_prev.data() + d.data();
        let direct = oracle_prox_quadratic(&theta, hat.matrix(), &q)?;
        let gap = (swept.data() - direct).amax();
        Ok((gap <= 1e-8, gap))
    }))
}

/// `Ĥ = H + H_u H_d⁻¹ H_u*` with the right side assembled from explicit
/// block inverses. Statistic: relative gap; passes at `1e-12` together with
/// `λ_min(Ĥ) > 0`.
pub fn hat_identity_trials(trials: usize, seed: u64, exec: Execution) -> TrialSummary {
    TrialSummary::fold(map_range(exec, trials, |t| {
        let mut rng = trial_rng(seed, t);
        let h = random_block_operator(2 + t % 3, 4, &mut rng)?;
        let st = h.row_structure();
        let n = st.total_dim();
        let hm = h.matrix();
        let mut upper = DMatrix::zeros(n, n);
        let mut dinv = DMatrix::zeros(n, n);
        for i in 0..st.num_blocks() {
            let ri = st.range(i);
            let blk = hm.view((ri.start, ri.start), (ri.len(), ri.len())).into_owned();
            let inv = blk
                .try_inverse()
                .ok_or_else(|| Error::NotPositiveDefinite(format!("diagonal block {i}")))?;
            dinv.view_mut((ri.start, ri.start), (ri.len(), ri.len())).copy_from(&inv);
            for j in (i + 1)..st.num_blocks() {
                let rj = st.range(j);
                upper
                    .view_mut((ri.start, rj.start), (ri.len(), rj.len()))
                    .copy_from(&hm.view((ri.start, rj.start), (ri.len(), rj.len())));
            }
        }
        let expected = hm + &upper * dinv * upper.transpose();
        let hat = hat_operator(&h)?;
        let rel = (hat.matrix() - &expected).amax() / expected.amax();
        let lo = min_eig_mat(hat.matrix());
        Ok((rel <= 1e-12 && lo > 0.0, rel))
    }))
}

/// `||Ĥ^{-1/2} d(δ̃, δ)|| <= ||H_d^{-1/2}(δ - δ̃)|| + ||H_d^{1/2}(H_d + H_u)⁻¹ δ̃||`.
/// Statistic: `lhs - rhs`; passes at `1e-10`.
pub fn error_bound_trials(trials: usize, seed: u64, exec: Execution) -> TrialSummary {
    TrialSummary::fold(map_range(exec, trials, |t| {
        let mut rng = trial_rng(seed, t);
        let h = random_block_operator(2 + t % 3, 4, &mut rng)?;
        let scale = 10f64.powf(rng.random_range(-3.0..1.0));
        let tols = random_tolerances(h.row_structure(), scale, &mut rng)?;
        let (lhs, rhs) = theorem_iv_bound(&tols, &split(&h)?, &hat_operator(&h)?)?;
        Ok((lhs <= rhs + 1e-10, lhs - rhs))
    }))
}

fn random_dims(rng: &mut impl Rng) -> Vec<usize> {
    (0..rng.random_range(1..=3)).map(|_| rng.random_range(1..=3)).collect()
}

/// Random admissible instance with a random proximal mode, used by the
/// constants trials.
fn random_config(tau: f64, rng: &mut impl Rng) -> Result<(ProblemSpec, TwoBlockConfig)> {
    let x_dims = random_dims(rng);
    let y_dims = random_dims(rng);
    let free = x_dims.iter().sum::<usize>() - x_dims[0] + y_dims.iter().sum::<usize>() - y_dims[0];
    let kinds = [ProxKind::Zero, ProxKind::L1 { weight: 0.5 }, ProxKind::Box { lo: -1.0, hi: 1.0 }];
    let knobs = RandomPreset {
        p1: kinds[rng.random_range(0..3)],
        q1: kinds[rng.random_range(0..3)],
        z_dim: rng.random_range(1..=free.max(1)),
        x_dims: if free == 0 { vec![x_dims[0], 1] } else { x_dims },
        y_dims,
        eig_range: (rng.random_range(0.05..1.0), rng.random_range(1.0..20.0)),
        majorizer: if rng.random::<bool>() { MajorizerMode::Tight } else { MajorizerMode::Loose },
        minorizer: if rng.random::<bool>() { MinorizerMode::Zero } else { MinorizerMode::MinEig },
        seed: rng.random(),
    };
    let spec = generate(&knobs)?;
    let sigma = 10f64.powf(rng.random_range(-1.0..1.0));
    let mode = match rng.random_range(0..3) {
        0 => ProxMode::Auto,
        1 => ProxMode::Stress,
        _ => ProxMode::Shift(rng.random_range(0.0..2.0)),
    };
    let mut cfg = TwoBlockConfig::with_prox(&spec, sigma, mode)?;
    cfg.tau = tau;
    Ok((spec, cfg))
}

/// `τ` sampled evenly in `(0.05, 1.615)`, each with `configs_per_tau` random
/// admissible configurations: `α, α̂ ∈ (0, 1)`, `β > 0`, `F ≻ 0`, `G ≻ 0`.
/// Statistic: `-min(β, λ_min(F), λ_min(G))`.
pub fn constants_trials(taus: usize, configs_per_tau: usize, seed: u64, exec: Execution) -> TrialSummary {
    TrialSummary::fold(map_range(exec, taus * configs_per_tau, |t| {
        let i = t / configs_per_tau;
        let tau = 0.05 + (i as f64 + 0.5) * (1.615 - 0.05) / taus as f64;
        let mut rng = trial_rng(seed, t);
        let (a, ah, b) = step_constants(tau);
        let (spec, cfg) = random_config(tau, &mut rng)?;
        let c = derive_constants(&spec, &cfg)?;
        let lf = min_eig_mat(c.f_op.matrix());
        let lg = min_eig_mat(c.g_op.matrix());
        let ok = a > 0.0 && a < 1.0 && ah > 0.0 && ah < 1.0 && b > 0.0 && lf > 0.0 && lg > 0.0;
        Ok((ok, -(b.min(lf).min(lg))))
    }))
}

/// Which method a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Algorithm {
    #[default]
    Sgs,
    TwoBlock,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Sgs => "sgs",
            Self::TwoBlock => "twoblock",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sgs" => Ok(Self::Sgs),
            "twoblock" => Ok(Self::TwoBlock),
            _ => Err(Error::InvalidParameter(format!("algorithm `{s}` is not sgs | twoblock"))),
        }
    }
}

/// Everything that determines a run besides the instance.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub algorithm: Algorithm,
    pub sigma: f64,
    pub tau: f64,
    pub stop_tol: f64,
    pub max_iter: usize,
    /// `ε_k` for the two-block method, `ε̃_k` for the sGS method.
    pub eps: ToleranceSchedule,
    pub prox: ProxMode,
    pub inexact: SweepInexactness,
    pub cross_check: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Sgs,
            sigma: 1.0,
            tau: DEFAULT_TAU,
            stop_tol: 1e-8,
            max_iter: 10_000,
            eps: ToleranceSchedule::Zero,
            prox: ProxMode::Auto,
            inexact: SweepInexactness::Exact,
            cross_check: false,
        }
    }
}

/// A finished run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    /// The two-block configuration the iterates satisfy (the embedded one
    /// for the sGS method); this is what the ledger is evaluated against.
    pub config: TwoBlockConfig,
    /// Constructed operators, sGS method only.
    pub operators: Option<ConstructedOperators>,
    pub outcome: SolveOutcome,
    /// Smallest eigenvalue of the user-level proximal term on `x` (`S` or `S̃`).
    pub prox_min_eig: f64,
    pub settings: RunSettings,
}

pub fn run(spec: &ProblemSpec, settings: &RunSettings) -> Result<RunOutput> {
    let init = TwoBlockState::zeros(spec)?;
    match settings.algorithm {
        Algorithm::TwoBlock => {
            let inexact = match settings.inexact {
                SweepInexactness::Exact => InexactMode::Exact,
                SweepInexactness::Tilted { seed } => InexactMode::Tilted { seed },
                SweepInexactness::ConjugateGradient => {
                    return Err(Error::InvalidParameter("inexact mode `cg` needs --algorithm sgs".into()))
                }
            };
            if settings.cross_check {
                return Err(Error::InvalidParameter("cross-check needs --algorithm sgs".into()));
            }
            let mut cfg = TwoBlockConfig::with_prox(spec, settings.sigma, settings.prox)?;
            cfg.tau = settings.tau;
            cfg.stop_tol = settings.stop_tol;
            cfg.max_iter = settings.max_iter;
            cfg.eps_schedule = settings.eps;
            cfg.inexact = inexact;
            let prox_min_eig = min_eig_mat(cfg.s.matrix());
            let outcome = imipadmm::solve(spec, cfg.clone(), init)?;
            Ok(RunOutput { config: cfg, operators: None, outcome, prox_min_eig, settings: settings.clone() })
        }
        Algorithm::Sgs => {
            let mut cfg = MultiBlockConfig::new(spec, settings.sigma, settings.prox)?;
            cfg.tau = settings.tau;
            cfg.stop_tol = settings.stop_tol;
            cfg.max_iter = settings.max_iter;
            cfg.eps_tilde_schedule = settings.eps;
            cfg.inexact = settings.inexact;
            cfg.cross_check = settings.cross_check;
            let prox_min_eig = min_eig_mat(cfg.s_tilde.matrix());
            let mut solver = MultiBlockSolver::new(spec, cfg)?;
            let config = solver.embedded_config();
            let operators = solver.operators().clone();
            let outcome = solver.solve(init)?;
            Ok(RunOutput { config, operators: Some(operators), outcome, prox_min_eig, settings: settings.clone() })
        }
    }
}

/// Full ledger of a run against `anchor`: the per-iteration inequalities,
/// the limit-anchor row when the run converged, and for the sGS method the
/// transport and cross-check rows.
pub fn verify_run(spec: &ProblemSpec, out: &RunOutput, anchor: &KktPoint, exec: Execution) -> Result<Vec<LedgerRow>> {
    let states = out.outcome.states();
    if states.len() != out.outcome.iterations + 1 {
        return Err(Error::InvalidParameter("run did not record its states".into()));
    }
    let mut rows = Ledger::new(spec, &out.config, anchor)?.run(&states, exec)?;
    if out.outcome.converged {
        rows.push(limit_anchor_row(spec, &out.config, &states)?);
    }
    if let Some(ops) = &out.operators {
        rows.extend(multi_block_rows(&out.outcome.trace, ops, &out.settings.eps));
    }
    Ok(rows)
}

/// One cell of the convergence grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCase {
    pub preset: &'static str,
    pub algorithm: Algorithm,
    pub tau: f64,
    pub sigma: f64,
    pub tilted: bool,
}

impl GridCase {
    pub fn settings(&self) -> RunSettings {
        let mut s = RunSettings {
            algorithm: self.algorithm,
            sigma: self.sigma,
            tau: self.tau,
            prox: if self.preset == "stress" { ProxMode::Stress } else { ProxMode::Auto },
            ..RunSettings::default()
        };
        if self.tilted {
            s.eps = ToleranceSchedule::geometric(1e-2, 0.5).expect("valid schedule");
            s.inexact = SweepInexactness::Tilted { seed: 7 };
        }
        s
    }
}

impl fmt::Display for GridCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} τ={} σ={} {}",
            self.preset,
            self.algorithm,
            self.tau,
            self.sigma,
            if self.tilted { "tilted" } else { "exact" }
        )
    }
}

/// Every preset × `τ ∈ {1, 1.618}` × `σ ∈ {0.5, 1, 5}` × exact / tilted ×
/// both methods.
pub fn convergence_grid() -> Vec<GridCase> {
    let mut out = Vec::new();
    for &preset in PRESET_NAMES {
        for algorithm in [Algorithm::TwoBlock, Algorithm::Sgs] {
            for tau in [1.0, 1.618] {
                for sigma in [0.5, 1.0, 5.0] {
                    for tilted in [false, true] {
                        out.push(GridCase { preset, algorithm, tau, sigma, tilted });
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub case: GridCase,
    pub converged: bool,
    pub iterations: usize,
    pub final_residual: f64,
    /// Max coordinate distance of the final `(x, y, z)` to the oracle.
    pub oracle_gap: f64,
    pub prox_min_eig: f64,
    /// Ledger rows, kept for the report.
    pub rows: Vec<LedgerRow>,
    pub ledger: LedgerSummary,
}

/// Oracle KKT points of every preset, in [`PRESET_NAMES`] order.
pub fn preset_anchors(exec: Execution) -> Result<Vec<(ProblemSpec, KktPoint)>> {
    map_slice(exec, PRESET_NAMES, |name| {
        let spec = InstancePreset::by_name(name)?.generate()?;
        let kkt = oracle_solve_with(&spec, 1e-12, Execution::Sequential)?;
        Ok((spec, kkt))
    })
    .into_iter()
    .collect()
}

fn run_case(case: &GridCase, spec: &ProblemSpec, anchor: &KktPoint) -> Result<GridResult> {
    let out = run(spec, &case.settings())?;
    let st = &out.outcome.state;
    let oracle_gap = (&st.x - &anchor.x).amax().max((&st.y - &anchor.y).amax()).max((&st.z - &anchor.z).amax());
    let rows = verify_run(spec, &out, anchor, Execution::Sequential)?;
    Ok(GridResult {
        case: case.clone(),
        converged: out.outcome.converged,
        iterations: out.outcome.iterations,
        final_residual: out.outcome.final_residual(),
        oracle_gap,
        prox_min_eig: out.prox_min_eig,
        ledger: summarize(&rows),
        rows,
    })
}

/// Runs `cases` (each with its ledger) with the runs themselves spread
/// over `exec`.
pub fn run_grid(cases: &[GridCase], exec: Execution) -> Result<Vec<GridResult>> {
    let anchors = preset_anchors(exec)?;
    map_slice(exec, cases, |case| {
        let i = PRESET_NAMES
            .iter()
            .position(|p| *p == case.preset)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown preset `{}`", case.preset)))?;
        let (spec, anchor) = &anchors[i];
        run_case(case, spec, anchor)
    })
    .into_iter()
    .collect()
}
