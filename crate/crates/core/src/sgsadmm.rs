//! Multi-block sGS-imiPADMM.
//!
//! Each iteration runs one backward/forward sGS sweep over the x blocks on
//! the quadratic with Hessian `M̃ = Σ̂_f + σAA* + S̃`, the same over the y
//! blocks with `Ñ = Σ̂_g + σBB* + T̃`, then the dual step
//! `z⁺ = z + τσ(A*x⁺ + B*y⁺ - c)`. The iteration is exactly the two-block
//! method with `S = S̃ + sGS(M̃)`, `T = T̃ + sGS(Ñ)` and certificates
//! `d = δ + M̃_u M̃_d⁻¹(δ - δ̃)`; cross-check mode runs both in lockstep.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::blockalg::{
    min_eig_mat, spectral_norm_mat, sqrt_psd_mat, split, symmetrize, BlockOperator,
    BlockStructure, SpdFactor,
};
use crate::error::{Error, Result};
pub use crate::imipadmm::ProxMode;
use crate::imipadmm::{
    minimal_shift, InexactMode, IterationRecord, SolveOutcome, SweepRecord,
    TwoBlockConfig, TwoBlockSolver, TwoBlockState, DEFAULT_TAU, STRESS_FACTOR, SPD_MARGIN, TAU_MAX, TILT_FRACTION,
};
use crate::model::ProblemSpec;
use crate::schedule::ToleranceSchedule;
use crate::sgs::{hat_operator, sgs_operator, tilt_vector, InnerSolve, SgsSweeper, SweepTolerances};

/// How the per-block tolerances of a sweep are realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepInexactness {
    #[default]
    Exact,
    /// Random per-block tolerance vectors of norm `0.9 ε̃_k`.
    Tilted { seed: u64 },
    /// Conjugate gradients on blocks `i >= 2`, stopped at gradient norm `ε̃_k`.
    ConjugateGradient,
}

impl fmt::Display for SweepInexactness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Exact => write!(f, "exact"),
            Self::Tilted { seed } => write!(f, "tilt:{seed}"),
            Self::ConjugateGradient => write!(f, "cg"),
        }
    }
}

impl FromStr for SweepInexactness {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "cg" {
            return Ok(Self::ConjugateGradient);
        }
        Ok(match s.parse::<InexactMode>()? {
            InexactMode::Exact => Self::Exact,
            InexactMode::Tilted { seed } => Self::Tilted { seed },
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiBlockConfig {
    pub sigma: f64,
    pub tau: f64,
    pub s_tilde: BlockOperator,
    pub t_tilde: BlockOperator,
    pub eps_tilde_schedule: ToleranceSchedule,
    pub inexact: SweepInexactness,
    pub max_iter: usize,
    pub stop_tol: f64,
    /// Run the two-block method in lockstep and record the reduction residual.
    pub cross_check: bool,
    pub record_states: bool,
}

impl MultiBlockConfig {
    pub fn new(spec: &ProblemSpec, sigma: f64, prox: ProxMode) -> Result<Self> {
        let (s_tilde, t_tilde) = proximal_terms(spec, sigma, prox)?;
        Ok(Self {
            sigma,
            tau: DEFAULT_TAU,
            s_tilde,
            t_tilde,
            eps_tilde_schedule: ToleranceSchedule::Zero,
            inexact: SweepInexactness::Exact,
            max_iter: 10_000,
            stop_tol: 1e-8,
            cross_check: false,
            record_states: true,
        })
    }
}

/// Builds `(S̃, T̃)` according to `mode`.
pub fn proximal_terms(spec: &ProblemSpec, sigma: f64, mode: ProxMode) -> Result<(BlockOperator, BlockOperator)> {
    let x = side_term(
        spec.x_structure(),
        spec.f().sigma_hat().matrix(),
        &spec.aat(),
        sigma,
        mode,
    )?;
    let y = side_term(
        spec.y_structure(),
        spec.g().sigma_hat().matrix(),
        &spec.bbt(),
        sigma,
        mode,
    )?;
    Ok((x, y))
}

fn side_term(
    st: &BlockStructure,
    sigma_hat: &DMatrix<f64>,
    coupling: &DMatrix<f64>,
    sigma: f64,
    mode: ProxMode,
) -> Result<BlockOperator> {
    let n = st.total_dim();
    let eye = DMatrix::<f64>::identity(n, n);
    let ok = |m: &DMatrix<f64>| side_admissible(st, sigma_hat, coupling, m, sigma, "S̃").is_ok();
    let mat = match mode {
        ProxMode::Zero => DMatrix::zeros(n, n),
        ProxMode::Shift(l) => &eye * l,
        ProxMode::Auto => {
            let l = minimal_shift(|l| ok(&(&eye * l)))?;
            &eye * l
        }
        ProxMode::Stress => {
            let base = sigma_hat * STRESS_FACTOR;
            let mu = minimal_shift(|mu| ok(&(&base + &eye * mu)))?;
            base + &eye * mu
        }
    };
    BlockOperator::symmetric(st.clone(), symmetrize(&mat))
}

/// `S̃ ⪰ -Σ̂/2`, every diagonal block of `M̃` positive definite, and
/// `Σ̂/2 + σAA* + S_sGS ≻ 0`.
fn side_admissible(
    st: &BlockStructure,
    sigma_hat: &DMatrix<f64>,
    coupling: &DMatrix<f64>,
    prox: &DMatrix<f64>,
    sigma: f64,
    name: &str,
) -> Result<BlockOperator> {
    let scale = 1.0 + spectral_norm_mat(sigma_hat).max(spectral_norm_mat(prox));
    let lo = min_eig_mat(&(sigma_hat * 0.5 + prox));
    if lo < -crate::blockalg::PSD_TOL * scale {
        return Err(Error::Inadmissible(format!(
            "{name} + Σ̂/2 is not positive semidefinite (min eigenvalue {lo:e})"
        )));
    }
    let tilde = symmetrize(&(sigma_hat + coupling * sigma + prox));
    for i in 0..st.num_blocks() {
        let r = st.range(i);
        let blk = tilde.view((r.start, r.start), (r.len(), r.len())).into_owned();
        let lo = min_eig_mat(&blk);
        if lo <= SPD_MARGIN * scale {
            return Err(Error::Inadmissible(format!(
                "diagonal block {i} of Σ̂ + σAA* + {name} is not positive definite (min eigenvalue {lo:e})"
            )));
        }
    }
    let tilde_op = BlockOperator::symmetric(st.clone(), tilde)?;
    let sgs = sgs_operator(&tilde_op)?;
    let s_sgs = prox + sgs.matrix();
    let lo = min_eig_mat(&(sigma_hat * 0.5 + coupling * sigma + &s_sgs));
    if lo <= SPD_MARGIN * scale {
        return Err(Error::Inadmissible(format!(
            "Σ̂/2 + σAA* + {name}_sGS is not positive definite (min eigenvalue {lo:e})"
        )));
    }
    Ok(tilde_op)
}

/// Operators induced by the sGS decomposition.
#[derive(Debug, Clone)]
pub struct ConstructedOperators {
    pub m_tilde: BlockOperator,
    pub n_tilde: BlockOperator,
    pub s_sgs: BlockOperator,
    pub t_sgs: BlockOperator,
    pub m_sgs: BlockOperator,
    pub n_sgs: BlockOperator,
    pub kappa: f64,
    pub kappa_prime: f64,
}

impl ConstructedOperators {
    pub fn kappa_max(&self) -> f64 {
        self.kappa.max(self.kappa_prime)
    }
}

/// `2√(s-1) ||H_d^{-1/2}|| + √s ||H_d^{1/2} (H_d + H_u)⁻¹||`
pub fn kappa(h: &BlockOperator) -> Result<f64> {
    let sp = split(h)?;
    let s = h.row_structure().num_blocks() as f64;
    let hd = sp.diag.matrix();
    let lo = min_eig_mat(hd);
    if lo <= 0.0 {
        return Err(Error::NotPositiveDefinite("block diagonal part of H".into()));
    }
    let l = hd + sp.upper.matrix();
    let l_inv = l
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::NotPositiveDefinite("H_d + H_u is singular".into()))?;
    let second = spectral_norm_mat(&(sqrt_psd_mat(hd)? * l_inv));
    Ok(2.0 * (s - 1.0).sqrt() / lo.sqrt() + s.sqrt() * second)
}

pub fn construct_operators(spec: &ProblemSpec, cfg: &MultiBlockConfig) -> Result<ConstructedOperators> {
    if !(cfg.sigma > 0.0 && cfg.sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {}", cfg.sigma)));
    }
    if !(cfg.tau > 0.0 && cfg.tau < TAU_MAX) {
        return Err(Error::InvalidParameter(format!("tau must lie in (0, (1+sqrt 5)/2), got {}", cfg.tau)));
    }
    if !cfg.s_tilde.is_self_adjoint() || cfg.s_tilde.row_structure() != spec.x_structure() {
        return Err(Error::Inadmissible("S̃ must be self-adjoint on the x space".into()));
    }
    if !cfg.t_tilde.is_self_adjoint() || cfg.t_tilde.row_structure() != spec.y_structure() {
        return Err(Error::Inadmissible("T̃ must be self-adjoint on the y space".into()));
    }
    let m_tilde = side_admissible(
        spec.x_structure(),
        spec.f().sigma_hat().matrix(),
        &spec.aat(),
        cfg.s_tilde.matrix(),
        cfg.sigma,
        "S̃",
    )?;
    let n_tilde = side_admissible(
        spec.y_structure(),
        spec.g().sigma_hat().matrix(),
        &spec.bbt(),
        cfg.t_tilde.matrix(),
        cfg.sigma,
        "T̃",
    )?;
    let s_sgs = cfg.s_tilde.add(&sgs_operator(&m_tilde)?)?.into_symmetric()?;
    let t_sgs = cfg.t_tilde.add(&sgs_operator(&n_tilde)?)?.into_symmetric()?;
    let m_sgs = hat_operator(&m_tilde)?;
    let n_sgs = hat_operator(&n_tilde)?;
    Ok(ConstructedOperators {
        kappa: kappa(&m_tilde)?,
        kappa_prime: kappa(&n_tilde)?,
        m_tilde,
        n_tilde,
        s_sgs,
        t_sgs,
        m_sgs,
        n_sgs,
    })
}

/// Two-block configuration the sGS iteration is equivalent to.
pub fn embedded_config(cfg: &MultiBlockConfig, ops: &ConstructedOperators) -> TwoBlockConfig {
    TwoBlockConfig {
        sigma: cfg.sigma,
        tau: cfg.tau,
        s: ops.s_sgs.clone(),
        t: ops.t_sgs.clone(),
        eps_schedule: cfg.eps_tilde_schedule.scaled(ops.kappa_max()),
        inexact: InexactMode::Exact,
        max_iter: cfg.max_iter,
        stop_tol: cfg.stop_tol,
        record_states: cfg.record_states,
    }
}

/// Per-side sweep data cached across iterations.
#[derive(Debug, Clone)]
struct Side {
    sweeper: SgsSweeper,
    split: crate::blockalg::OperatorSplit,
    hat: SpdFactor,
}

impl Side {
    fn new(h: &BlockOperator, theta: crate::model::ProxFriendlyFunction, hat: &BlockOperator) -> Result<Self> {
        Ok(Self {
            sweeper: SgsSweeper::new(h, theta)?,
            split: split(h)?,
            hat: SpdFactor::new(hat.matrix())?,
        })
    }
}

/// Output of one sGS iteration.
#[derive(Debug, Clone)]
pub struct MultiBlockStep {
    pub state: TwoBlockState,
    pub sweep: SweepRecord,
}

#[derive(Debug, Clone)]
pub struct MultiBlockSolver<'a> {
    spec: &'a ProblemSpec,
    cfg: MultiBlockConfig,
    ops: ConstructedOperators,
    x_side: Side,
    y_side: Side,
    twin: Option<TwoBlockSolver<'a>>,
    rng: ChaCha8Rng,
}

impl<'a> MultiBlockSolver<'a> {
    pub fn new(spec: &'a ProblemSpec, cfg: MultiBlockConfig) -> Result<Self> {
        let ops = construct_operators(spec, &cfg)?;
        let x_side = Side::new(&ops.m_tilde, spec.p1().clone(), &ops.m_sgs)?;
        let y_side = Side::new(&ops.n_tilde, spec.q1().clone(), &ops.n_sgs)?;
        let twin = if cfg.cross_check {
            Some(TwoBlockSolver::new(spec, embedded_config(&cfg, &ops))?)
        } else {
            None
        };
        let seed = match cfg.inexact {
            SweepInexactness::Tilted { seed } => seed,
            _ => 0,
        };
        Ok(Self {
            spec,
            cfg,
            ops,
            x_side,
            y_side,
            twin,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn operators(&self) -> &ConstructedOperators {
        &self.ops
    }
    pub fn config(&self) -> &MultiBlockConfig {
        &self.cfg
    }
    pub fn embedded_config(&self) -> TwoBlockConfig {
        embedded_config(&self.cfg, &self.ops)
    }

    /// `b̃_x = M̃ x^k - ∇f(x^k) - A z^k - σA(A*x^k + B*y^k - c)`
    fn rhs_x(&self, w: &TwoBlockState) -> DVector<f64> {
        let spec = self.spec;
        self.ops.m_tilde.matrix() * &w.x
            - spec.f().gradient(&w.x)
            - spec.a_adj().transpose() * (&w.z + spec.residual(&w.x, &w.y) * self.cfg.sigma)
    }

    /// `b̃_y = Ñ y^k - ∇g(y^k) - B z^k - σB(A*x^{k+1} + B*y^k - c)`
    fn rhs_y(&self, w: &TwoBlockState, x_next: &DVector<f64>) -> DVector<f64> {
        let spec = self.spec;
        self.ops.n_tilde.matrix() * &w.y
            - spec.g().gradient(&w.y)
            - spec.b_adj().transpose() * (&w.z + spec.residual(x_next, &w.y) * self.cfg.sigma)
    }

    /// Per-block random vectors with each block of norm `0.9 ε̃`.
    fn block_tilt(&mut self, st: &BlockStructure, eps: f64) -> DVector<f64> {
        let mut out = DVector::zeros(st.total_dim());
        if eps == 0.0 {
            return out;
        }
        for i in 0..st.num_blocks() {
            let r = st.range(i);
            let u = DVector::<f64>::from_iterator(r.len(), (0..r.len()).map(|_| StandardNormal.sample(&mut self.rng)));
            let nrm = u.norm();
            if nrm > 0.0 {
                out.rows_mut(r.start, r.len()).copy_from(&(u * (TILT_FRACTION * eps / nrm)));
            }
        }
        out
    }

    /// One sweep on a side; returns `(u⁺, δ̃, δ)`.
    fn sweep_side(&mut self, y_side: bool, b: &DVector<f64>, u_prev: &DVector<f64>, eps: f64) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
        let st = if y_side { self.spec.y_structure().clone() } else { self.spec.x_structure().clone() };
        match self.cfg.inexact {
            SweepInexactness::Exact => {
                let z = DVector::zeros(u_prev.len());
                let side = if y_side { &self.y_side } else { &self.x_side };
                let (_, up) = side.sweeper.sweep(b, u_prev, &z, &z)?;
                Ok((up, z.clone(), z))
            }
            SweepInexactness::Tilted { .. } => {
                let delta = self.block_tilt(&st, eps);
                let mut delta_tilde = self.block_tilt(&st, eps);
                let d1 = st.block_dim(0);
                delta_tilde.rows_mut(0, d1).copy_from(&delta.rows(0, d1));
                let side = if y_side { &self.y_side } else { &self.x_side };
                let (_, up) = side.sweeper.sweep(b, u_prev, &delta_tilde, &delta)?;
                Ok((up, delta_tilde, delta))
            }
            SweepInexactness::ConjugateGradient => {
                let side = if y_side { &self.y_side } else { &self.x_side };
                let cs = side.sweeper.sweep_inner(
                    b,
                    u_prev,
                    &DVector::zeros(st.block_dim(0)),
                    InnerSolve::ConjugateGradient { tol: eps },
                )?;
                Ok((cs.u_plus, cs.delta_tilde, cs.delta))
            }
        }
    }

    fn check_block_tolerances(&self, st: &BlockStructure, v: &DVector<f64>, eps: f64, k: usize) -> Result<()> {
        for i in 0..st.num_blocks() {
            let r = st.range(i);
            let nrm = v.rows(r.start, r.len()).norm();
            if nrm > eps * (1.0 + 1e-9) + 1e-14 {
                return Err(Error::Subproblem(format!(
                    "block {i} tolerance {nrm:e} exceeds ε̃_{k} = {eps:e}"
                )));
            }
        }
        Ok(())
    }

    pub fn iterate(&mut self, w: &TwoBlockState) -> Result<MultiBlockStep> {
        let k = w.k;
        let eps = self.cfg.eps_tilde_schedule.eps(k);
        let xs = self.spec.x_structure().clone();
        let ys = self.spec.y_structure().clone();

        let bx = self.rhs_x(w);
        let (x, dtx, dx) = self.sweep_side(false, &bx, &w.x, eps)?;
        self.check_block_tolerances(&xs, &dx, eps, k)?;
        self.check_block_tolerances(&xs, &dtx, eps, k)?;
        let by = self.rhs_y(w, &x);
        let (y, dty, dy) = self.sweep_side(true, &by, &w.y, eps)?;
        self.check_block_tolerances(&ys, &dy, eps, k)?;
        self.check_block_tolerances(&ys, &dty, eps, k)?;

        let d_x = tilt_vector(&SweepTolerances::new(bv(&xs, dtx.clone())?, bv(&xs, dx.clone())?)?, &self.x_side.split)?
            .into_data();
        let d_y = tilt_vector(&SweepTolerances::new(bv(&ys, dty.clone())?, bv(&ys, dy.clone())?)?, &self.y_side.split)?
            .into_data();

        let r = self.spec.residual(&x, &y);
        let sigma = self.cfg.sigma;
        let state = TwoBlockState {
            k: k + 1,
            z: &w.z + &r * (self.cfg.tau * sigma),
            z_tilde: &w.z + &r * sigma,
            x,
            y,
            r,
            d_x,
            d_y,
        };
        let reduction_residual = match &self.twin {
            Some(twin) => {
                let other = twin.step_with(w, &state.d_x, &state.d_y)?;
                Some(
                    (&other.x - &state.x)
                        .amax()
                        .max((&other.y - &state.y).amax())
                        .max((&other.z - &state.z).amax()),
                )
            }
            None => None,
        };
        Ok(MultiBlockStep {
            state,
            sweep: SweepRecord {
                delta_x: dx,
                delta_tilde_x: dtx,
                delta_y: dy,
                delta_tilde_y: dty,
                reduction_residual,
            },
        })
    }

    fn record(&self, w: &TwoBlockState, sweep: Option<SweepRecord>) -> IterationRecord {
        let eps_tilde = if w.k == 0 { 0.0 } else { self.cfg.eps_tilde_schedule.eps(w.k - 1) };
        IterationRecord {
            k: w.k,
            eps: eps_tilde * self.ops.kappa_max(),
            cert_x: self.x_side.hat.inv_norm(&w.d_x),
            cert_y: self.y_side.hat.inv_norm(&w.d_y),
            kkt: self.spec.kkt_residual(&w.x, &w.y, &w.z),
            state: self.cfg.record_states.then(|| w.clone()),
            sweep,
        }
    }

    pub fn solve(&mut self, init: TwoBlockState) -> Result<SolveOutcome> {
        let mut state = init;
        let mut trace = vec![self.record(&state, None)];
        let mut converged = trace[0].kkt.total <= self.cfg.stop_tol;
        while !converged && state.k < self.cfg.max_iter {
            let step = self.iterate(&state)?;
            state = step.state;
            let rec = self.record(&state, Some(step.sweep));
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

fn bv(st: &BlockStructure, v: DVector<f64>) -> Result<crate::blockalg::BlockVector> {
    crate::blockalg::BlockVector::new(st.clone(), v)
}

pub fn solve(spec: &ProblemSpec, cfg: MultiBlockConfig, init: TwoBlockState) -> Result<SolveOutcome> {
    MultiBlockSolver::new(spec, cfg)?.solve(init)
}

/// Per iteration, `(k, ||M_sGS^{-1/2} d_x|| - κ ε̃, ||N_sGS^{-1/2} d_y|| - κ' ε̃)`;
/// both excesses are non-positive when the certificate transport bound holds.
pub fn transport_ratios(trace: &[IterationRecord], ops: &ConstructedOperators, schedule: &ToleranceSchedule) -> Vec<(usize, f64, f64)> {
    trace
        .iter()
        .filter(|r| r.k > 0)
        .map(|r| {
            let e = schedule.eps(r.k - 1);
            (r.k, r.cert_x - ops.kappa * e, r.cert_y - ops.kappa_prime * e)
        })
        .collect()
}
