//! Convergence ledger evaluated along recorded trajectories.
//!
//! Given a two-block configuration (for the multi-block method, the
//! equivalent one from [`crate::sgsadmm::embedded_config`]), the recorded
//! iterates `w^0, w^1, ...` with their certificates, and a KKT point `w̄`,
//! the ledger evaluates per iteration:
//!
//! * the key descent inequality `lhs_k <= φ_k(w̄) - φ_{k+1}(w̄)`,
//! * the residual inequality linking `r^k`, `r^{k+1}` and the y-steps,
//! * the shadow-iterate error bounds in the `M` and `N` norms,
//! * `||ξ^k||² = φ_k(w̄)` and the uniform bound on `||ξ^{k+1}||`.
//!
//! `d_x^k`, `d_y^k` denote the certificates of the step `w^k -> w^{k+1}`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::blockalg::{inv_sqrt_pd_mat, spectral_norm_mat, sqrt_psd_mat, symmetrize};
use crate::error::{Error, Result};
use crate::imipadmm::{
    derive_constants, DerivedConstants, IterationRecord, TwoBlockConfig, TwoBlockSolver, TwoBlockState,
};
use crate::instances::{gaussian_vector, KktPoint};
use crate::model::{ProblemSpec, SmoothConvexFunction};
use crate::parallel::{map_range, Execution};
use crate::schedule::ToleranceSchedule;
use crate::sgsadmm::ConstructedOperators;

/// Relative slack of every inequality check: `1e-8 (1 + max(|lhs|, |rhs|))`.
pub const INEQ_SLACK: f64 = 1e-8;
/// Relative tolerance of the `||ξ||² = φ` identity.
pub const XI_TOL: f64 = 1e-10;

pub fn slack(lhs: f64, rhs: f64) -> f64 {
    INEQ_SLACK * (1.0 + lhs.abs().max(rhs.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Key,
    Residual,
    ErrorX,
    ErrorY,
    XiPhi,
    Fejer,
    Monotone,
    LimitPhi,
    GradientMonotone,
    TransportX,
    TransportY,
    Reduction,
}

impl Check {
    pub fn name(self) -> &'static str {
        match self {
            Self::Key => "key",
            Self::Residual => "residual",
            Self::ErrorX => "error_x",
            Self::ErrorY => "error_y",
            Self::XiPhi => "xi_phi",
            Self::Fejer => "fejer",
            Self::Monotone => "monotone",
            Self::LimitPhi => "limit_phi",
            Self::GradientMonotone => "grad_monotone",
            Self::TransportX => "transport_x",
            Self::TransportY => "transport_y",
            Self::Reduction => "reduction",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "==")]
    Eq,
}

/// One evaluated instance of a check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LedgerRow {
    pub check: Check,
    pub k: usize,
    pub lhs: f64,
    pub relation: Relation,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
}

impl LedgerRow {
    pub fn new(check: Check, k: usize, lhs: f64, relation: Relation, rhs: f64, slack: f64) -> Self {
        let pass = match relation {
            Relation::Le => lhs <= rhs + slack,
            Relation::Ge => lhs >= rhs - slack,
            Relation::Eq => (lhs - rhs).abs() <= slack,
        };
        Self { check, k, lhs, relation, rhs, slack, pass }
    }

    pub fn ineq(check: Check, k: usize, lhs: f64, relation: Relation, rhs: f64) -> Self {
        Self::new(check, k, lhs, relation, rhs, slack(lhs, rhs))
    }
}

/// Exact subproblem minimizers from `w^k`, the second one anchored at the
/// first: `x̄^{k+1}`, `ȳ^{k+1}`, `r̄^{k+1}`, `z̄^{k+1} = z^k + τσ r̄^{k+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowIterate {
    pub x_bar: DVector<f64>,
    pub y_bar: DVector<f64>,
    pub r_bar: DVector<f64>,
    pub z_bar: DVector<f64>,
}

/// Per-iteration summary of the ledger quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationRecord {
    pub k: usize,
    pub phi: f64,
    pub xi_norm: f64,
    pub key_lhs: f64,
    pub key_rhs: f64,
    pub residual_lhs: f64,
    pub residual_rhs: f64,
}

/// Precomputed operators and constants of the ledger.
pub struct Ledger<'a> {
    spec: &'a ProblemSpec,
    cfg: TwoBlockConfig,
    consts: DerivedConstants,
    solver: TwoBlockSolver<'a>,
    anchor: (DVector<f64>, DVector<f64>, DVector<f64>),
    /// `Σ̂_f + S`
    sf: DMatrix<f64>,
    /// `Σ̂_g + T`
    tg: DMatrix<f64>,
    sf_sqrt: DMatrix<f64>,
    tg_sqrt: DMatrix<f64>,
    n_sqrt: DMatrix<f64>,
    aat: DMatrix<f64>,
    bbt: DMatrix<f64>,
    /// `||N^{-1/2} B A* M^{-1/2}||`
    coupling_norm: f64,
    /// `||G^{-1/2} N^{1/2}||`
    gn_norm: f64,
}

impl<'a> Ledger<'a> {
    pub fn new(spec: &'a ProblemSpec, cfg: &TwoBlockConfig, anchor: &KktPoint) -> Result<Self> {
        let consts = derive_constants(spec, cfg)?;
        let solver = TwoBlockSolver::new(spec, cfg.clone())?;
        let sf = symmetrize(&(spec.f().sigma_hat().matrix() + cfg.s.matrix()));
        let tg = symmetrize(&(spec.g().sigma_hat().matrix() + cfg.t.matrix()));
        let m = consts.m_op.matrix();
        let n = consts.n_op.matrix();
        let ba = spec.b_adj().transpose() * spec.a_adj();
        let coupling_norm = spectral_norm_mat(&(inv_sqrt_pd_mat(n)? * ba * inv_sqrt_pd_mat(m)?));
        let n_sqrt = sqrt_psd_mat(n)?;
        let gn_norm = spectral_norm_mat(&(inv_sqrt_pd_mat(consts.g_op.matrix())? * &n_sqrt));
        Ok(Self {
            sf_sqrt: sqrt_psd_mat(&sf)?,
            tg_sqrt: sqrt_psd_mat(&tg)?,
            n_sqrt,
            aat: spec.aat(),
            bbt: spec.bbt(),
            spec,
            cfg: cfg.clone(),
            consts,
            solver,
            anchor: (anchor.x.clone(), anchor.y.clone(), anchor.z.clone()),
            sf,
            tg,
            coupling_norm,
            gn_norm,
        })
    }

    pub fn constants(&self) -> &DerivedConstants {
        &self.consts
    }

    /// `ϱ = sqrt(5 (1 + (1 + σ ||N^{-1/2} B A* M^{-1/2}||)²))`
    pub fn varrho(&self) -> f64 {
        let t = 1.0 + self.cfg.sigma * self.coupling_norm;
        (5.0 * (1.0 + t * t)).sqrt()
    }

    /// Right-hand side factor of the uniform `ξ` bound: `ϱ + ||G^{-1/2} N^{1/2}||`.
    pub fn fejer_factor(&self) -> f64 {
        self.varrho() + self.gn_norm
    }

    /// `1 + σ ||N^{-1/2} B A* M^{-1/2}||`
    pub fn y_error_factor(&self) -> f64 {
        1.0 + self.cfg.sigma * self.coupling_norm
    }

    fn prev_y<'s>(states: &'s [&TwoBlockState], k: usize) -> &'s DVector<f64> {
        &states[k.saturating_sub(1)].y
    }

    fn wn(v: &DVector<f64>, h: &DMatrix<f64>) -> f64 {
        v.dot(&(h * v))
    }

    /// `φ_k(w̄)`; for `k = 0` the convention `y^{-1} = y^0` is used.
    pub fn phi(&self, states: &[&TwoBlockState], k: usize) -> f64 {
        let (xb, yb, zb) = &self.anchor;
        let w = states[k];
        let (sigma, tau) = (self.cfg.sigma, self.cfg.tau);
        let dy = Self::prev_y(states, k) - &w.y;
        let feas = self.spec.a_adj() * xb + self.spec.b_adj() * &w.y - self.spec.c();
        (zb - &w.z).norm_squared() / (tau * sigma)
            + Self::wn(&(xb - &w.x), &self.sf)
            + Self::wn(&(yb - &w.y), &self.tg)
            + sigma * feas.norm_squared()
            + self.consts.alpha_hat * sigma * w.r.norm_squared()
            + self.consts.alpha * Self::wn(&dy, &self.tg)
    }

    /// `ξ^k`, assembled from operator square roots.
    pub fn xi(&self, states: &[&TwoBlockState], k: usize) -> DVector<f64> {
        let (xb, yb, zb) = &self.anchor;
        let w = states[k];
        let (sigma, tau) = (self.cfg.sigma, self.cfg.tau);
        let parts = [
            (&w.z - zb) / (tau * sigma).sqrt(),
            &self.sf_sqrt * (&w.x - xb),
            &self.n_sqrt * (&w.y - yb),
            &w.r * (self.consts.alpha_hat * sigma).sqrt(),
            &self.tg_sqrt * (Self::prev_y(states, k) - &w.y) * self.consts.alpha.sqrt(),
        ];
        let len = parts.iter().map(|p| p.len()).sum();
        let mut out = DVector::zeros(len);
        let mut off = 0;
        for p in &parts {
            out.rows_mut(off, p.len()).copy_from(p);
            off += p.len();
        }
        out
    }

    /// `(lhs, rhs)` of the key inequality at `k >= 1`.
    pub fn key_inequality(&self, states: &[&TwoBlockState], k: usize) -> (f64, f64) {
        let (xb, yb, _) = &self.anchor;
        let (w, w1) = (states[k], states[k + 1]);
        let (dx, dy, dy_prev) = (&w1.d_x, &w1.d_y, &w.d_y);
        let alpha = self.consts.alpha;
        let step_x = &w.x - &w1.x;
        let step_y = &w.y - &w1.y;
        let lhs = 2.0 * alpha * (dy - dy_prev).dot(&step_y) - 2.0 * dx.dot(&(&w1.x - xb))
            - 2.0 * dy.dot(&(&w1.y - yb))
            + Self::wn(&step_x, self.consts.f_op.matrix())
            + Self::wn(&step_y, self.consts.g_op.matrix())
            + self.consts.beta * self.cfg.sigma * w1.r.norm_squared();
        (lhs, self.phi(states, k) - self.phi(states, k + 1))
    }

    /// `(lhs, rhs)` of the residual inequality at `k >= 1`.
    pub fn residual_inequality(&self, states: &[&TwoBlockState], k: usize) -> (f64, f64) {
        let (w, w1) = (states[k], states[k + 1]);
        let (sigma, tau) = (self.cfg.sigma, self.cfg.tau);
        let (alpha, alpha_hat, beta) = (self.consts.alpha, self.consts.alpha_hat, self.consts.beta);
        let mixed = self.spec.residual(&w1.x, &w.y);
        let step_y = &w.y - &w1.y;
        let lhs = (1.0 - tau) * sigma * w1.r.norm_squared()
            + sigma * mixed.norm_squared()
            + 2.0 * alpha * (&w.d_y - &w1.d_y).dot(&step_y);
        let dx = &w1.x - &w.x;
        let dy_prev = Self::prev_y(states, k) - &w.y;
        let g_like = &self.tg * alpha + &self.bbt * (tau.min(1.0 + tau - tau * tau) * alpha * sigma);
        let rhs = alpha_hat * sigma * (w1.r.norm_squared() - w.r.norm_squared())
            + beta * sigma * w1.r.norm_squared()
            + Self::wn(&dx, &self.aat) * ((1.0 - alpha) * sigma / 2.0)
            - alpha * Self::wn(&dy_prev, &self.tg)
            + Self::wn(&step_y, &g_like);
        (lhs, rhs)
    }

    /// Exact subproblem solutions from `w^k`.
    pub fn shadow(&self, w: &TwoBlockState) -> Result<ShadowIterate> {
        let zx = DVector::zeros(w.x.len());
        let zy = DVector::zeros(w.y.len());
        let x_bar = self.solver.solve_x(w, &zx)?;
        let y_bar = self.solver.solve_y(w, &x_bar, &zy)?;
        let r_bar = self.spec.residual(&x_bar, &y_bar);
        let z_bar = &w.z + &r_bar * (self.cfg.tau * self.cfg.sigma);
        Ok(ShadowIterate { x_bar, y_bar, r_bar, z_bar })
    }

    /// `(||x^{k+1} - x̄^{k+1}||_M, ε_k)` and `(||y^{k+1} - ȳ^{k+1}||_N, factor·ε_k)`.
    pub fn error_bounds(&self, states: &[&TwoBlockState], k: usize) -> Result<((f64, f64), (f64, f64))> {
        let sh = self.shadow(states[k])?;
        let w1 = states[k + 1];
        let eps = self.cfg.eps_schedule.eps(k);
        let ex = Self::wn(&(&w1.x - &sh.x_bar), self.consts.m_op.matrix()).max(0.0).sqrt();
        let ey = Self::wn(&(&w1.y - &sh.y_bar), self.consts.n_op.matrix()).max(0.0).sqrt();
        Ok(((ex, eps), (ey, self.y_error_factor() * eps)))
    }

    /// All per-iteration rows, evaluated in parallel over `k`.
    pub fn run(&self, states: &[&TwoBlockState], exec: Execution) -> Result<Vec<LedgerRow>> {
        let kk = states.len();
        if kk < 2 {
            return Ok(Vec::new());
        }
        let per_k: Vec<Result<Vec<LedgerRow>>> = map_range(exec, kk - 1, |k| {
            let mut rows = Vec::with_capacity(6);
            if k >= 1 {
                let (l, r) = self.key_inequality(states, k);
                rows.push(LedgerRow::ineq(Check::Key, k, l, Relation::Le, r));
                let (l, r) = self.residual_inequality(states, k);
                rows.push(LedgerRow::ineq(Check::Residual, k, l, Relation::Ge, r));
            }
            let ((ex, bx), (ey, by)) = self.error_bounds(states, k)?;
            rows.push(LedgerRow::ineq(Check::ErrorX, k, ex, Relation::Le, bx));
            rows.push(LedgerRow::ineq(Check::ErrorY, k, ey, Relation::Le, by));
            Ok(rows)
        });
        let mut rows = Vec::new();
        for r in per_k {
            rows.extend(r?);
        }
        rows.extend(self.xi_rows(states, exec));
        Ok(rows)
    }

    /// `||ξ^k||² = φ_k`, the uniform bound on `||ξ^{k+1}||`, and with zero
    /// tolerances the monotonicity of `||ξ^k||`.
    pub fn xi_rows(&self, states: &[&TwoBlockState], exec: Execution) -> Vec<LedgerRow> {
        let kk = states.len();
        if kk < 2 {
            return Vec::new();
        }
        let vals: Vec<(f64, f64)> = map_range(exec, kk - 1, |i| {
            let k = i + 1;
            (self.phi(states, k), self.xi(states, k).norm())
        });
        let mut rows = Vec::new();
        let xi1 = vals[0].1;
        let bound = xi1 + self.fejer_factor() * self.cfg.eps_schedule.total();
        let exact = self.cfg.eps_schedule.is_zero();
        for (i, &(phi, xi)) in vals.iter().enumerate() {
            let k = i + 1;
            let sq = xi * xi;
            let tol = XI_TOL * phi.max(sq) + 1e-14;
            rows.push(LedgerRow::new(Check::XiPhi, k, sq, Relation::Eq, phi, tol));
            rows.push(LedgerRow::ineq(Check::Fejer, k, xi, Relation::Le, bound));
            if exact && i + 1 < vals.len() {
                let next = vals[i + 1].1;
                rows.push(LedgerRow::new(Check::Monotone, k + 1, next, Relation::Le, xi, 1e-10 * (1.0 + xi)));
            }
        }
        rows
    }

    /// Per-iteration summaries for `k >= 1`.
    pub fn records(&self, states: &[&TwoBlockState]) -> Vec<VerificationRecord> {
        (1..states.len().saturating_sub(1))
            .map(|k| {
                let (key_lhs, key_rhs) = self.key_inequality(states, k);
                let (residual_lhs, residual_rhs) = self.residual_inequality(states, k);
                VerificationRecord {
                    k,
                    phi: self.phi(states, k),
                    xi_norm: self.xi(states, k).norm(),
                    key_lhs,
                    key_rhs,
                    residual_lhs,
                    residual_rhs,
                }
            })
            .collect()
    }
}

/// Scale used by the limit-anchor check: `(1 + σ)(1 + ||c||)² + ||Σ̂_g + T|| (1 + ||y||)²`.
pub fn limit_scale(spec: &ProblemSpec, cfg: &TwoBlockConfig, y: &DVector<f64>) -> f64 {
    let tg = spec.g().sigma_hat().matrix() + cfg.t.matrix();
    (1.0 + cfg.sigma) * (1.0 + spec.c().norm()).powi(2) + spectral_norm_mat(&tg) * (1.0 + y.norm()).powi(2)
}

/// With the final iterate as anchor, `φ_K <= 10 stop_tol² scale`.
pub fn limit_anchor_row(spec: &ProblemSpec, cfg: &TwoBlockConfig, states: &[&TwoBlockState]) -> Result<LedgerRow> {
    let last = states.last().ok_or_else(|| Error::InvalidParameter("empty trajectory".into()))?;
    let anchor = KktPoint {
        x: last.x.clone(),
        y: last.y.clone(),
        z: last.z.clone(),
        residual: f64::NAN,
    };
    let ledger = Ledger::new(spec, cfg, &anchor)?;
    let k = states.len() - 1;
    let phi = ledger.phi(states, k);
    let bound = 10.0 * cfg.stop_tol * cfg.stop_tol * limit_scale(spec, cfg, &last.y);
    Ok(LedgerRow::new(Check::LimitPhi, k, phi, Relation::Le, bound, 0.0))
}

/// Rows specific to the multi-block method: certificate transport
/// `||M_sGS^{-1/2} d_x^k|| <= κ ε̃_{k-1}` (and the `y` analogue), plus the
/// cross-check distance between the two formulations when it was recorded.
pub fn multi_block_rows(
    trace: &[IterationRecord],
    ops: &ConstructedOperators,
    schedule: &ToleranceSchedule,
) -> Vec<LedgerRow> {
    let mut rows = Vec::new();
    for r in trace.iter().filter(|r| r.k > 0) {
        let e = schedule.eps(r.k - 1);
        rows.push(LedgerRow::ineq(Check::TransportX, r.k, r.cert_x, Relation::Le, ops.kappa * e));
        rows.push(LedgerRow::ineq(Check::TransportY, r.k, r.cert_y, Relation::Le, ops.kappa_prime * e));
        if let Some(res) = r.sweep.as_ref().and_then(|s| s.reduction_residual) {
            rows.push(LedgerRow::new(Check::Reduction, r.k, res, Relation::Le, REDUCTION_TOL, 0.0));
        }
    }
    rows
}

/// Largest per-coordinate gap allowed between the two formulations.
pub const REDUCTION_TOL: f64 = 1e-9;

/// Monotonicity inequality of a smooth convex function:
/// `<∇h(u) - ∇h(u'), v - u'> >= -1/4 ||v - u||²_{Σ̂}` on random triples.
pub fn check_gradient_monotonicity(h: &SmoothConvexFunction, trials: usize, seed: u64, exec: Execution) -> Vec<LedgerRow> {
    let n = h.structure().total_dim();
    let sh = h.sigma_hat().matrix();
    map_range(exec, trials, |t| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(t as u64));
        let u = gaussian_vector(n, &mut rng);
        let u2 = gaussian_vector(n, &mut rng);
        let v = gaussian_vector(n, &mut rng);
        let lhs = (h.gradient(&u) - h.gradient(&u2)).dot(&(&v - &u2));
        let vu = &v - &u;
        let rhs = -0.25 * vu.dot(&(sh * &vu));
        LedgerRow::new(Check::GradientMonotone, t, lhs, Relation::Ge, rhs, 1e-10 * (1.0 + lhs.abs().max(rhs.abs())))
    })
}

/// Aggregate of a ledger run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LedgerSummary {
    pub rows: usize,
    pub failures: usize,
    /// Largest `lhs - rhs` (or its mirror for `>=`) relative to the slack.
    pub worst_ratio: f64,
}

pub fn summarize(rows: &[LedgerRow]) -> LedgerSummary {
    let mut s = LedgerSummary { rows: rows.len(), ..Default::default() };
    for r in rows {
        if !r.pass {
            s.failures += 1;
        }
        let excess = match r.relation {
            Relation::Le => r.lhs - r.rhs,
            Relation::Ge => r.rhs - r.lhs,
            Relation::Eq => (r.lhs - r.rhs).abs(),
        };
        if r.slack > 0.0 {
            s.worst_ratio = s.worst_ratio.max(excess / r.slack);
        }
    }
    s
}

/// Writes one CSV row per `(check, k)`.
pub fn write_report<W: Write>(rows: &[LedgerRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
