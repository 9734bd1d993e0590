//! Two-block inexact majorized indefinite-proximal ADMM.
//!
//! Each iteration solves
//!
//! ```text
//! x⁺ ≈ argmin p(x) + 1/2 <x, Mx> - <b_x, x>           (certificate d_x)
//! y⁺ ≈ argmin q(y) + 1/2 <y, Ny> - <b_y, y>           (certificate d_y)
//! z⁺ = z + τσ (A*x⁺ + B*y⁺ - c)
//! ```
//!
//! with `M = Σ̂_f + σAA* + S`, `N = Σ̂_g + σBB* + T`, and certificates obeying
//! `||M^{-1/2} d_x|| <= ε_k`, `||N^{-1/2} d_y|| <= ε_k`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::blockalg::{
    max_eig_mat, min_eig_mat, spectral_norm_mat, symmetrize, BlockOperator, BlockStructure,
    SpdFactor, PSD_TOL,
};
use crate::error::{Error, Result};
use crate::model::{KktResidual, ProblemSpec, ProxFriendlyFunction};
use crate::schedule::ToleranceSchedule;

/// Largest step length the solver accepts; just below the golden ratio.
pub const TAU_MAX: f64 = 1.618_033_9;

pub const DEFAULT_TAU: f64 = 1.618;

/// How subproblem inexactness is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InexactMode {
    /// Exact subproblem solves, zero certificates.
    #[default]
    Exact,
    /// Random certificate directions scaled to `0.9 ε_k` in the relevant
    /// metric; the tilted subproblem is then solved exactly.
    Tilted { seed: u64 },
}

impl std::fmt::Display for InexactMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Exact => write!(f, "exact"),
            Self::Tilted { seed } => write!(f, "tilt:{seed}"),
        }
    }
}

impl std::str::FromStr for InexactMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "exact" => Ok(Self::Exact),
            other => other
                .strip_prefix("tilt:")
                .and_then(|seed| seed.parse().ok())
                .map(|seed| Self::Tilted { seed })
                .ok_or_else(|| {
                    Error::InvalidParameter(format!("inexact mode `{s}` is not exact | tilt:<seed>"))
                }),
        }
    }
}

/// Construction of the proximal terms `S̃`, `T̃`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ProxMode {
    /// Zero if admissible, otherwise the smallest admissible `λI`.
    #[default]
    Auto,
    Zero,
    Shift(f64),
    /// `S̃ = -0.49 Σ̂_f`, `T̃ = -0.49 Σ̂_g`, plus the smallest diagonal
    /// correction restoring admissibility.
    Stress,
}

/// Scale of the indefinite stress proximal terms.
pub const STRESS_FACTOR: f64 = -0.49;

impl std::fmt::Display for ProxMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Auto => write!(f, "auto"),
            Self::Zero => write!(f, "zero"),
            Self::Shift(l) => write!(f, "shift:{l}"),
            Self::Stress => write!(f, "stress"),
        }
    }
}

impl std::str::FromStr for ProxMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(Self::Auto),
            "zero" => Ok(Self::Zero),
            "stress" => Ok(Self::Stress),
            other => other
                .strip_prefix("shift:")
                .and_then(|l| l.parse::<f64>().ok())
                .filter(|l| l.is_finite())
                .map(Self::Shift)
                .ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "prox mode `{s}` is not auto | zero | shift:<λ> | stress"
                    ))
                }),
        }
    }
}

/// Fraction of the tolerance used by tilted certificates.
pub const TILT_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct TwoBlockConfig {
    pub sigma: f64,
    pub tau: f64,
    pub s: BlockOperator,
    pub t: BlockOperator,
    pub eps_schedule: ToleranceSchedule,
    pub inexact: InexactMode,
    pub max_iter: usize,
    pub stop_tol: f64,
    /// Keep full iterates in the trace (needed by the verification ledger).
    pub record_states: bool,
}

impl TwoBlockConfig {
    /// `S = T = 0`, exact mode, `τ = 1.618`.
    pub fn new(spec: &ProblemSpec, sigma: f64) -> Self {
        Self {
            sigma,
            tau: DEFAULT_TAU,
            s: BlockOperator::zeros_square(spec.x_structure().clone()),
            t: BlockOperator::zeros_square(spec.y_structure().clone()),
            eps_schedule: ToleranceSchedule::Zero,
            inexact: InexactMode::Exact,
            max_iter: 10_000,
            stop_tol: 1e-8,
            record_states: true,
        }
    }

    /// Like [`TwoBlockConfig::new`] with `S`, `T` built by `mode`. `Auto`
    /// and `Stress` pick the smallest diagonal shift that makes the terms
    /// admissible.
    pub fn with_prox(spec: &ProblemSpec, sigma: f64, mode: ProxMode) -> Result<Self> {
        let mut cfg = Self::new(spec, sigma);
        cfg.s = two_block_term(
            spec.x_structure(),
            spec.f().sigma_hat().matrix(),
            &spec.aat(),
            sigma,
            mode,
            ("S", "Σ̂_f", "AA*"),
        )?;
        cfg.t = two_block_term(
            spec.y_structure(),
            spec.g().sigma_hat().matrix(),
            &spec.bbt(),
            sigma,
            mode,
            ("T", "Σ̂_g", "BB*"),
        )?;
        Ok(cfg)
    }
}

fn two_block_term(
    st: &BlockStructure,
    sigma_hat: &DMatrix<f64>,
    coupling: &DMatrix<f64>,
    sigma: f64,
    mode: ProxMode,
    names: (&str, &str, &str),
) -> Result<BlockOperator> {
    let n = st.total_dim();
    let eye = DMatrix::<f64>::identity(n, n);
    let ok = |m: &DMatrix<f64>| side_conditions(sigma_hat, coupling, m, sigma, names).is_ok();
    let mat = match mode {
        ProxMode::Zero => DMatrix::zeros(n, n),
        ProxMode::Shift(l) => &eye * l,
        ProxMode::Auto => &eye * minimal_shift(|l| ok(&(&eye * l)))?,
        ProxMode::Stress => {
            let base = sigma_hat * STRESS_FACTOR;
            let mu = minimal_shift(|mu| ok(&(&base + &eye * mu)))?;
            base + &eye * mu
        }
    };
    BlockOperator::symmetric(st.clone(), symmetrize(&mat))
}

/// Relative margin used for the strict `≻ 0` admissibility conditions.
pub const SPD_MARGIN: f64 = 1e-10;

/// Smallest `λ >= 0` with `ok(λ)`, by doubling then bisection to `1e-8`.
pub fn minimal_shift(ok: impl Fn(f64) -> bool) -> Result<f64> {
    if ok(0.0) {
        return Ok(0.0);
    }
    let mut hi = 1e-3;
    while !ok(hi) {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Inadmissible("no diagonal shift makes the proximal term admissible".into()));
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-8 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Checks the step length and the indefinite proximal conditions
/// `S ⪰ -Σ̂_f/2`, `T ⪰ -Σ̂_g/2`, `Σ̂_f/2 + σAA* + S ≻ 0`, `Σ̂_g/2 + σBB* + T ≻ 0`.
pub fn check_admissible(spec: &ProblemSpec, cfg: &TwoBlockConfig) -> Result<()> {
    if !(cfg.sigma > 0.0 && cfg.sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {}", cfg.sigma)));
    }
    if !(cfg.tau > 0.0 && cfg.tau < TAU_MAX) {
        return Err(Error::InvalidParameter(format!(
            "tau must lie in (0, (1+sqrt 5)/2), got {}",
            cfg.tau
        )));
    }
    if !cfg.s.is_self_adjoint() || cfg.s.row_structure() != spec.x_structure() {
        return Err(Error::Inadmissible("S must be self-adjoint on the x space".into()));
    }
    if !cfg.t.is_self_adjoint() || cfg.t.row_structure() != spec.y_structure() {
        return Err(Error::Inadmissible("T must be self-adjoint on the y space".into()));
    }
    side_conditions(
        spec.f().sigma_hat().matrix(),
        &spec.aat(),
        cfg.s.matrix(),
        cfg.sigma,
        ("S", "Σ̂_f", "AA*"),
    )?;
    side_conditions(
        spec.g().sigma_hat().matrix(),
        &spec.bbt(),
        cfg.t.matrix(),
        cfg.sigma,
        ("T", "Σ̂_g", "BB*"),
    )
}

pub(crate) fn side_conditions(
    sigma_hat: &DMatrix<f64>,
    coupling: &DMatrix<f64>,
    prox: &DMatrix<f64>,
    sigma: f64,
    names: (&str, &str, &str),
) -> Result<()> {
    let (s, sh, aa) = names;
    let scale = 1.0 + spectral_norm_mat(sigma_hat).max(spectral_norm_mat(prox));
    let half = sigma_hat * 0.5;
    let lo = min_eig_mat(&(&half + prox));
    if lo < -PSD_TOL * scale {
        return Err(Error::Inadmissible(format!(
            "{s} + {sh}/2 is not positive semidefinite (min eigenvalue {lo:e})"
        )));
    }
    let lo = min_eig_mat(&(&half + coupling * sigma + prox));
    if lo <= SPD_MARGIN * scale {
        return Err(Error::Inadmissible(format!(
            "{sh}/2 + σ{aa} + {s} is not positive definite (min eigenvalue {lo:e})"
        )));
    }
    Ok(())
}

/// Step-length dependent constants and the operators of the convergence
/// analysis.
#[derive(Debug, Clone)]
pub struct DerivedConstants {
    pub alpha: f64,
    pub alpha_hat: f64,
    pub beta: f64,
    /// `F = Σ̂_f/2 + S + (1-α)σ/2 AA*`
    pub f_op: BlockOperator,
    /// `G = Σ̂_g/2 + T + min{τ, 1+τ-τ²} ασ BB*`
    pub g_op: BlockOperator,
    /// `M = Σ̂_f + σAA* + S`
    pub m_op: BlockOperator,
    /// `N = Σ̂_g + σBB* + T`
    pub n_op: BlockOperator,
}

/// `(α, α̂, β)` for a step length `τ`.
pub fn step_constants(tau: f64) -> (f64, f64, f64) {
    let alpha = (1.0 + tau / (1.0 + tau).min(1.0 + 1.0 / tau)) / 2.0;
    let alpha_hat = 1.0 - alpha * tau.min(1.0 / tau);
    let beta = 1.0_f64.min(1.0 - tau + 1.0 / tau) * alpha - (1.0 - alpha) * tau;
    (alpha, alpha_hat, beta)
}

pub fn derive_constants(spec: &ProblemSpec, cfg: &TwoBlockConfig) -> Result<DerivedConstants> {
    check_admissible(spec, cfg)?;
    let (alpha, alpha_hat, beta) = step_constants(cfg.tau);
    if !(alpha > 0.0 && alpha < 1.0 && alpha_hat > 0.0 && alpha_hat < 1.0 && beta > 0.0) {
        return Err(Error::Inadmissible(format!(
            "step constants out of range: α={alpha}, α̂={alpha_hat}, β={beta}"
        )));
    }
    let sigma = cfg.sigma;
    let sf = spec.f().sigma_hat().matrix();
    let sg = spec.g().sigma_hat().matrix();
    let aat = spec.aat();
    let bbt = spec.bbt();
    let sx = cfg.s.matrix();
    let ty = cfg.t.matrix();
    let xs = spec.x_structure();
    let ys = spec.y_structure();
    let f_op = op(xs, sf * 0.5 + sx + &aat * ((1.0 - alpha) * sigma / 2.0))?;
    let g_op = op(
        ys,
        sg * 0.5 + ty + &bbt * (cfg.tau.min(1.0 + cfg.tau - cfg.tau * cfg.tau) * alpha * sigma),
    )?;
    let m_op = op(xs, sf + &aat * sigma + sx)?;
    let n_op = op(ys, sg + &bbt * sigma + ty)?;
    for (name, o) in [("F", &f_op), ("G", &g_op), ("M", &m_op), ("N", &n_op)] {
        let m = o.matrix();
        let lo = min_eig_mat(m);
        if lo <= SPD_MARGIN * (1.0 + max_eig_mat(m).abs()) {
            return Err(Error::Inadmissible(format!(
                "{name} is not positive definite (min eigenvalue {lo:e})"
            )));
        }
    }
    Ok(DerivedConstants {
        alpha,
        alpha_hat,
        beta,
        f_op,
        g_op,
        m_op,
        n_op,
    })
}

fn op(s: &BlockStructure, m: DMatrix<f64>) -> Result<BlockOperator> {
    BlockOperator::symmetric(s.clone(), symmetrize(&m))
}

/// Solver for `argmin θ(u1) + 1/2 <u, Pu> - <q, u>` with `P ≻ 0` fixed.
/// The non-block-1 coordinates are eliminated through a Schur complement so
/// only a single prox-quadratic on block 1 remains.
#[derive(Debug, Clone)]
pub struct ProxQuadSolver {
    d1: usize,
    theta: ProxFriendlyFunction,
    full: SpdFactor,
    /// `P22⁻¹ P21`
    coupling: DMatrix<f64>,
    rest: Option<SpdFactor>,
    schur: DMatrix<f64>,
}

impl ProxQuadSolver {
    pub fn new(p: &DMatrix<f64>, d1: usize, theta: ProxFriendlyFunction) -> Result<Self> {
        let n = p.nrows();
        let full = SpdFactor::new(p)?;
        let nr = n - d1;
        let p11 = p.view((0, 0), (d1, d1)).into_owned();
        let (coupling, rest, schur) = if nr == 0 {
            (DMatrix::zeros(0, d1), None, p11)
        } else {
            let p22 = p.view((d1, d1), (nr, nr)).into_owned();
            let rest = SpdFactor::new(&p22)?;
            let p21 = p.view((d1, 0), (nr, d1)).into_owned();
            let coupling = rest.solve_mat(&p21);
            let schur = symmetrize(&(p11 - p21.transpose() * &coupling));
            (coupling, Some(rest), schur)
        };
        Ok(Self {
            d1,
            theta,
            full,
            coupling,
            rest,
            schur,
        })
    }

    /// `||P^{-1/2} d||`
    pub fn inv_norm(&self, d: &DVector<f64>) -> f64 {
        self.full.inv_norm(d)
    }

    pub fn solve(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        if self.theta.is_zero() {
            return Ok(self.full.solve(q));
        }
        let d1 = self.d1;
        let n = q.len();
        let q1 = q.rows(0, d1).into_owned();
        let Some(rest) = &self.rest else {
            return self.theta.prox_quadratic(&self.schur, &q1);
        };
        let q2 = q.rows(d1, n - d1).into_owned();
        let reduced = &q1 - self.coupling.transpose() * &q2;
        let x1 = self.theta.prox_quadratic(&self.schur, &reduced)?;
        let x2 = rest.solve(&q2) - &self.coupling * &x1;
        let mut out = DVector::zeros(n);
        out.rows_mut(0, d1).copy_from(&x1);
        out.rows_mut(d1, n - d1).copy_from(&x2);
        Ok(out)
    }
}

/// Primal-dual iterate `w^k = (x^k, y^k, z^k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoBlockState {
    pub k: usize,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub z: DVector<f64>,
    /// `r^k = A*x^k + B*y^k - c`
    pub r: DVector<f64>,
    /// Certificates of the step that produced this state (zero at `k = 0`).
    pub d_x: DVector<f64>,
    pub d_y: DVector<f64>,
    /// `z^{k-1} + σ r^k`
    pub z_tilde: DVector<f64>,
}

impl TwoBlockState {
    pub fn initial(spec: &ProblemSpec, x: DVector<f64>, y: DVector<f64>, z: DVector<f64>) -> Result<Self> {
        crate::blockalg::check_len(spec.x_dim(), x.len(), "initial x")?;
        crate::blockalg::check_len(spec.y_dim(), y.len(), "initial y")?;
        crate::blockalg::check_len(spec.z_dim(), z.len(), "initial z")?;
        if !spec.p_value(&x).is_finite() || !spec.q_value(&y).is_finite() {
            return Err(Error::InvalidParameter("initial point lies outside dom p × dom q".into()));
        }
        let r = spec.residual(&x, &y);
        Ok(Self {
            k: 0,
            d_x: DVector::zeros(x.len()),
            d_y: DVector::zeros(y.len()),
            z_tilde: z.clone(),
            x,
            y,
            z,
            r,
        })
    }

    pub fn zeros(spec: &ProblemSpec) -> Result<Self> {
        Self::initial(
            spec,
            DVector::zeros(spec.x_dim()),
            DVector::zeros(spec.y_dim()),
            DVector::zeros(spec.z_dim()),
        )
    }
}

/// Per-sweep certificate record of the multi-block method.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepRecord {
    pub delta_x: DVector<f64>,
    pub delta_tilde_x: DVector<f64>,
    pub delta_y: DVector<f64>,
    pub delta_tilde_y: DVector<f64>,
    /// `max(||x_sGS - x_2block||_∞, ||y_sGS - y_2block||_∞)` in cross-check mode.
    pub reduction_residual: Option<f64>,
}

/// One trace entry, describing the iterate `w^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// Tolerance that bounded the certificates of the step producing `w^k`.
    pub eps: f64,
    /// `||M^{-1/2} d_x||` for those certificates.
    pub cert_x: f64,
    pub cert_y: f64,
    pub kkt: KktResidual,
    pub state: Option<TwoBlockState>,
    pub sweep: Option<SweepRecord>,
}

/// Result of a full solve.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub state: TwoBlockState,
    pub trace: Vec<IterationRecord>,
    pub converged: bool,
    pub iterations: usize,
}

impl SolveOutcome {
    pub fn final_residual(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.kkt.total)
    }

    /// Full iterates `w^0, w^1, ...` (empty if states were not recorded).
    pub fn states(&self) -> Vec<&TwoBlockState> {
        self.trace.iter().filter_map(|r| r.state.as_ref()).collect()
    }
}

/// Algorithm state shared by the iteration loop: cached subproblem
/// factorizations and the tilt generator.
#[derive(Debug, Clone)]
pub struct TwoBlockSolver<'a> {
    spec: &'a ProblemSpec,
    cfg: TwoBlockConfig,
    consts: DerivedConstants,
    x_sub: ProxQuadSolver,
    y_sub: ProxQuadSolver,
    rng: ChaCha8Rng,
}

impl<'a> TwoBlockSolver<'a> {
    pub fn new(spec: &'a ProblemSpec, cfg: TwoBlockConfig) -> Result<Self> {
        let consts = derive_constants(spec, &cfg)?;
        let x_sub = ProxQuadSolver::new(
            consts.m_op.matrix(),
            spec.x_structure().block_dim(0),
            spec.p1().clone(),
        )?;
        let y_sub = ProxQuadSolver::new(
            consts.n_op.matrix(),
            spec.y_structure().block_dim(0),
            spec.q1().clone(),
        )?;
        let seed = match cfg.inexact {
            InexactMode::Exact => 0,
            InexactMode::Tilted { seed } => seed,
        };
        Ok(Self {
            spec,
            cfg,
            consts,
            x_sub,
            y_sub,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn spec(&self) -> &ProblemSpec {
        self.spec
    }
    pub fn config(&self) -> &TwoBlockConfig {
        &self.cfg
    }
    pub fn constants(&self) -> &DerivedConstants {
        &self.consts
    }

    /// `b_x = M x^k - ∇f(x^k) - A z^k - σA(A*x^k + B*y^k - c)`
    pub fn rhs_x(&self, state: &TwoBlockState) -> DVector<f64> {
        let spec = self.spec;
        let at = spec.a_adj().transpose();
        self.consts.m_op.matrix() * &state.x
            - spec.f().gradient(&state.x)
            - &at * (&state.z + spec.residual(&state.x, &state.y) * self.cfg.sigma)
    }

    /// `b_y = N y^k - ∇g(y^k) - B z^k - σB(A*x^{k+1} + B*y^k - c)`
    pub fn rhs_y(&self, state: &TwoBlockState, x_next: &DVector<f64>) -> DVector<f64> {
        let spec = self.spec;
        let bt = spec.b_adj().transpose();
        self.consts.n_op.matrix() * &state.y
            - spec.g().gradient(&state.y)
            - &bt * (&state.z + spec.residual(x_next, &state.y) * self.cfg.sigma)
    }

    /// Exact minimizer of the x-subproblem tilted by `d_x`.
    pub fn solve_x(&self, state: &TwoBlockState, d_x: &DVector<f64>) -> Result<DVector<f64>> {
        self.x_sub.solve(&(self.rhs_x(state) + d_x))
    }

    /// Exact minimizer of the y-subproblem (anchored at `x_next`) tilted by `d_y`.
    pub fn solve_y(&self, state: &TwoBlockState, x_next: &DVector<f64>, d_y: &DVector<f64>) -> Result<DVector<f64>> {
        self.y_sub.solve(&(self.rhs_y(state, x_next) + d_y))
    }

    pub fn cert_norm_x(&self, d: &DVector<f64>) -> f64 {
        self.x_sub.inv_norm(d)
    }
    pub fn cert_norm_y(&self, d: &DVector<f64>) -> f64 {
        self.y_sub.inv_norm(d)
    }

    /// Random direction with `||P^{-1/2} d|| = 0.9 ε`.
    fn draw_tilt(&mut self, n: usize, eps: f64, y_side: bool) -> DVector<f64> {
        if eps == 0.0 {
            return DVector::zeros(n);
        }
        let u = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut self.rng)));
        let nrm = if y_side { self.y_sub.inv_norm(&u) } else { self.x_sub.inv_norm(&u) };
        if nrm == 0.0 {
            return DVector::zeros(n);
        }
        u * (TILT_FRACTION * eps / nrm)
    }

    /// One iteration with certificates drawn according to the inexact mode.
    pub fn step(&mut self, state: &TwoBlockState) -> Result<TwoBlockState> {
        let eps = self.cfg.eps_schedule.eps(state.k);
        let (d_x, d_y) = match self.cfg.inexact {
            InexactMode::Exact => (DVector::zeros(state.x.len()), DVector::zeros(state.y.len())),
            InexactMode::Tilted { .. } => {
                let dx = self.draw_tilt(state.x.len(), eps, false);
                let dy = self.draw_tilt(state.y.len(), eps, true);
                (dx, dy)
            }
        };
        self.step_with(state, &d_x, &d_y)
    }

    /// One iteration with prescribed certificates; errors if they exceed
    /// the tolerance `ε_k`.
    pub fn step_with(&self, state: &TwoBlockState, d_x: &DVector<f64>, d_y: &DVector<f64>) -> Result<TwoBlockState> {
        let eps = self.cfg.eps_schedule.eps(state.k);
        let (cx, cy) = (self.cert_norm_x(d_x), self.cert_norm_y(d_y));
        let bound = eps * (1.0 + 1e-9) + 1e-14;
        if cx > bound || cy > bound {
            return Err(Error::Subproblem(format!(
                "certificate bound violated at k={}: ({cx:e}, {cy:e}) > ε_k = {eps:e}",
                state.k
            )));
        }
        let x = self.solve_x(state, d_x)?;
        let y = self.solve_y(state, &x, d_y)?;
        let r = self.spec.residual(&x, &y);
        let sigma = self.cfg.sigma;
        let z = &state.z + &r * (self.cfg.tau * sigma);
        let z_tilde = &state.z + &r * sigma;
        Ok(TwoBlockState {
            k: state.k + 1,
            x,
            y,
            z,
            r,
            d_x: d_x.clone(),
            d_y: d_y.clone(),
            z_tilde,
        })
    }

    pub fn record(&self, state: &TwoBlockState) -> IterationRecord {
        let eps = if state.k == 0 { 0.0 } else { self.cfg.eps_schedule.eps(state.k - 1) };
        IterationRecord {
            k: state.k,
            eps,
            cert_x: self.cert_norm_x(&state.d_x),
            cert_y: self.cert_norm_y(&state.d_y),
            kkt: self.spec.kkt_residual(&state.x, &state.y, &state.z),
            state: self.cfg.record_states.then(|| state.clone()),
            sweep: None,
        }
    }

    /// Iterate until the relative KKT residual drops to `stop_tol` or the
    /// iteration budget is spent. Running out of budget is reported through
    /// `converged = false`, not as an error.
    pub fn solve(&mut self, init: TwoBlockState) -> Result<SolveOutcome> {
        let mut state = init;
        let mut trace = vec![self.record(&state)];
        let mut converged = trace[0].kkt.total <= self.cfg.stop_tol;
        while !converged && state.k < self.cfg.max_iter {
            state = self.step(&state)?;
            let rec = self.record(&state);
            converged = rec.kkt.total <= self.cfg.stop_tol;
            trace.push(rec);
        }
        Ok(SolveOutcome {
            iterations: state.k,
            state,
            trace,
            converged,
        })
    }
}

/// Convenience wrapper: build the solver and run it from `init`.
pub fn solve(spec: &ProblemSpec, cfg: TwoBlockConfig, init: TwoBlockState) -> Result<SolveOutcome> {
    TwoBlockSolver::new(spec, cfg)?.solve(init)
}
