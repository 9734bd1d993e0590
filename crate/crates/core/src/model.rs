//! Problem data: prox-friendly nonsmooth first blocks, smooth quadratic
//! couplers with majorizer/minorizer operators, linear coupling constraints,
//! and KKT residual evaluation.

use nalgebra::{DMatrix, DVector};

use crate::blockalg::{
    check_len, max_eig_mat, min_eig_mat, spectral_norm_mat, BlockOperator, BlockStructure,
    BlockVector, SpdFactor, PSD_TOL,
};
use crate::error::{Error, Result};

/// A closed proper convex function with an exact prox, living on block 1.
#[derive(Debug, Clone, PartialEq)]
pub enum ProxFriendlyFunction {
    Zero { dim: usize },
    /// `weight * ||u||_1`
    L1 { dim: usize, weight: f64 },
    /// Indicator of `{lo <= u <= hi}` (coordinatewise).
    BoxIndicator { lo: Vec<f64>, hi: Vec<f64> },
}

impl ProxFriendlyFunction {
    pub fn zero(dim: usize) -> Self {
        Self::Zero { dim }
    }

    pub fn l1(dim: usize, weight: f64) -> Result<Self> {
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(Error::InvalidParameter(format!("l1 weight {weight} must be >= 0")));
        }
        Ok(Self::L1 { dim, weight })
    }

    pub fn box_indicator(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch("box bounds differ in length".into()));
        }
        if let Some(j) = (0..lo.len()).find(|&j| !(lo[j] <= hi[j])) {
            return Err(Error::InvalidParameter(format!(
                "box coordinate {j}: lo {} > hi {}",
                lo[j], hi[j]
            )));
        }
        Ok(Self::BoxIndicator { lo, hi })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Zero { dim } | Self::L1 { dim, .. } => *dim,
            Self::BoxIndicator { lo, .. } => lo.len(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero { .. })
    }

    /// Function value; `+inf` outside the domain.
    pub fn value(&self, u: &DVector<f64>) -> f64 {
        match self {
            Self::Zero { .. } => 0.0,
            Self::L1 { weight, .. } => weight * u.lp_norm(1),
            Self::BoxIndicator { lo, hi } => {
                if u.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| l <= v && v <= h) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Scalar prox of `t * fn_j` for coordinate `j`.
    fn prox_coord(&self, j: usize, t: f64, v: f64) -> f64 {
        match self {
            Self::Zero { .. } => v,
            Self::L1 { weight, .. } => soft_threshold(v, t * weight),
            Self::BoxIndicator { lo, hi } => v.clamp(lo[j], hi[j]),
        }
    }

    /// `argmin_u { fn(u) + ||u - v||^2 / (2t) }`.
    pub fn prox(&self, t: f64, v: &DVector<f64>) -> Result<DVector<f64>> {
        if !(t > 0.0) {
            return Err(Error::InvalidParameter(format!("prox step {t} must be > 0")));
        }
        check_len(self.dim(), v.len(), "prox")?;
        Ok(DVector::from_iterator(
            v.len(),
            v.iter().enumerate().map(|(j, &vj)| self.prox_coord(j, t, vj)),
        ))
    }

    /// Distance (max-norm) from `g` to the subdifferential at `u`;
    /// `+inf` when `u` is outside the domain.
    pub fn subgradient_violation(&self, u: &DVector<f64>, g: &DVector<f64>) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..u.len() {
            let (uj, gj) = (u[j], g[j]);
            let v = match self {
                Self::Zero { .. } => gj.abs(),
                Self::L1 { weight, .. } => {
                    if uj > 0.0 {
                        (gj - weight).abs()
                    } else if uj < 0.0 {
                        (gj + weight).abs()
                    } else {
                        (gj.abs() - weight).max(0.0)
                    }
                }
                Self::BoxIndicator { lo, hi } => {
                    let (l, h) = (lo[j], hi[j]);
                    if uj < l || uj > h {
                        f64::INFINITY
                    } else if l == h {
                        0.0
                    } else if uj == l {
                        gj.max(0.0)
                    } else if uj == h {
                        (-gj).max(0.0)
                    } else {
                        gj.abs()
                    }
                }
            };
            worst = worst.max(v);
        }
        worst
    }

    /// `argmin_u { fn(u) + 1/2 <u, P u> - <q, u> }` for positive definite `P`.
    ///
    /// Closed form when `fn` is zero or `P` is diagonal. Otherwise coordinate
    /// descent identifies the active pattern and a reduced linear solve on the
    /// free coordinates polishes the point to working precision; the result is
    /// accepted only if its subgradient certificate checks out.
    pub fn prox_quadratic(&self, p: &DMatrix<f64>, q: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.dim();
        check_len(n, q.len(), "prox_quadratic")?;
        check_len(n, p.nrows(), "prox_quadratic")?;
        if self.is_zero() {
            return Ok(SpdFactor::new(p)?.solve(q));
        }
        if (0..n).all(|i| (0..n).all(|j| i == j || p[(i, j)] == 0.0)) {
            return Ok(DVector::from_iterator(
                n,
                (0..n).map(|j| self.prox_coord(j, 1.0 / p[(j, j)], q[j] / p[(j, j)])),
            ));
        }
        self.prox_quadratic_iterative(p, q)
    }

    fn prox_quadratic_iterative(&self, p: &DMatrix<f64>, q: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.dim();
        if (0..n).any(|j| !(p[(j, j)] > 0.0)) {
            return Err(Error::NotPositiveDefinite(
                "prox-quadratic metric has a non-positive diagonal".into(),
            ));
        }
        let scale = 1.0 + q.amax() + p.amax();
        let violation = |u: &DVector<f64>| self.subgradient_violation(u, &(q - p * u));
        let mut u = DVector::from_iterator(
            n,
            (0..n).map(|j| self.prox_coord(j, 1.0 / p[(j, j)], q[j] / p[(j, j)])),
        );
        let mut best: Option<(f64, DVector<f64>)> = None;
        const MAX_SWEEPS: usize = 200_000;
        let mut sweeps = 0;
        while sweeps < MAX_SWEEPS {
            let mut change: f64 = 0.0;
            for j in 0..n {
                let pj = p[(j, j)];
                let rest = p.row(j).transpose().dot(&u) - pj * u[j];
                let new = self.prox_coord(j, 1.0 / pj, (q[j] - rest) / pj);
                change = change.max((new - u[j]).abs());
                u[j] = new;
            }
            sweeps += 1;
            if change <= 1e-13 * (1.0 + u.amax()) || sweeps % 64 == 0 {
                if let Some(polished) = self.polish(p, q, &u) {
                    let v = violation(&polished);
                    if v <= 1e-11 * scale {
                        return Ok(polished);
                    }
                    if best.as_ref().is_none_or(|(b, _)| v < *b) {
                        best = Some((v, polished));
                    }
                }
                if change <= f64::EPSILON * (1.0 + u.amax()) {
                    break;
                }
            }
        }
        let v = violation(&u);
        match best {
            Some((bv, bu)) if bv <= v && bv <= 1e-8 * scale => Ok(bu),
            _ if v <= 1e-8 * scale => Ok(u),
            _ => Err(Error::Subproblem(format!(
                "prox-quadratic did not converge (certificate violation {v:e})"
            ))),
        }
    }

    /// Solve the reduced linear system on the free coordinates of the
    /// pattern read off `u`.
    fn polish(&self, p: &DMatrix<f64>, q: &DVector<f64>, u: &DVector<f64>) -> Option<DVector<f64>> {
        let n = u.len();
        let mut out = u.clone();
        let mut rhs_shift = DVector::zeros(n);
        let mut free = Vec::with_capacity(n);
        for j in 0..n {
            match self {
                Self::Zero { .. } => free.push(j),
                Self::L1 { weight, .. } => {
                    if u[j] != 0.0 {
                        free.push(j);
                        rhs_shift[j] = weight * u[j].signum();
                    } else {
                        out[j] = 0.0;
                    }
                }
                Self::BoxIndicator { lo, hi } => {
                    if u[j] > lo[j] && u[j] < hi[j] {
                        free.push(j);
                    }
                }
            }
        }
        if free.is_empty() {
            return Some(out);
        }
        let nf = free.len();
        let mut pff = DMatrix::zeros(nf, nf);
        let mut rhs = DVector::zeros(nf);
        for (a, &i) in free.iter().enumerate() {
            let mut r = q[i] - rhs_shift[i];
            for j in 0..n {
                if !free.contains(&j) {
                    r -= p[(i, j)] * out[j];
                }
            }
            rhs[a] = r;
            for (b, &j) in free.iter().enumerate() {
                pff[(a, b)] = p[(i, j)];
            }
        }
        let sol = nalgebra::Cholesky::new(pff)?.solve(&rhs);
        for (a, &i) in free.iter().enumerate() {
            out[i] = sol[a];
        }
        // a free coordinate that crossed its pattern boundary invalidates the guess
        for &j in &free {
            match self {
                Self::L1 { .. } if out[j].signum() != u[j].signum() || out[j] == 0.0 => return None,
                Self::BoxIndicator { lo, hi } if out[j] < lo[j] || out[j] > hi[j] => return None,
                _ => {}
            }
        }
        Some(out)
    }
}

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// How the majorizing operator of a smooth quadratic is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MajorizerMode {
    /// `Σ̂ = Q`
    Tight,
    /// `Σ̂ = ||Q|| I`
    Loose,
}

/// How the minorizing operator of a smooth quadratic is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinorizerMode {
    /// `Σ = 0`
    Zero,
    /// `Σ = λ_min(Q) I`
    MinEig,
}

impl MajorizerMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Tight => "tight",
            Self::Loose => "loose",
        }
    }
}

impl MinorizerMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Zero => "zero",
            Self::MinEig => "mineig",
        }
    }
}

/// `1/2 <x, Qx> + <l, x> + const` together with operators `Σ ⪯ Q ⪯ Σ̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothConvexFunction {
    quad: BlockOperator,
    linear: BlockVector,
    constant: f64,
    majorizer_mode: MajorizerMode,
    minorizer_mode: MinorizerMode,
    sigma_hat: BlockOperator,
    sigma: BlockOperator,
}

impl SmoothConvexFunction {
    pub fn new(
        quad: BlockOperator,
        linear: BlockVector,
        constant: f64,
        majorizer_mode: MajorizerMode,
        minorizer_mode: MinorizerMode,
    ) -> Result<Self> {
        if !quad.is_self_adjoint() {
            return Err(Error::NotSelfAdjoint(f64::NAN));
        }
        check_len(quad.row_structure().total_dim(), linear.len(), "smooth function")?;
        let structure = quad.row_structure().clone();
        let q = quad.matrix();
        let norm = spectral_norm_mat(q);
        let lo = min_eig_mat(q);
        if lo < -PSD_TOL * norm {
            return Err(Error::NotPsd { min_eig: lo, norm });
        }
        let n = structure.total_dim();
        let sigma_hat = match majorizer_mode {
            MajorizerMode::Tight => quad.clone(),
            MajorizerMode::Loose => {
                BlockOperator::symmetric(structure.clone(), DMatrix::identity(n, n) * max_eig_mat(q))?
            }
        };
        let sigma = match minorizer_mode {
            MinorizerMode::Zero => BlockOperator::zeros_square(structure.clone()),
            MinorizerMode::MinEig => {
                BlockOperator::symmetric(structure.clone(), DMatrix::identity(n, n) * lo.max(0.0))?
            }
        };
        Ok(Self {
            quad,
            linear,
            constant,
            majorizer_mode,
            minorizer_mode,
            sigma_hat,
            sigma,
        })
    }

    pub fn structure(&self) -> &BlockStructure {
        self.quad.row_structure()
    }

    pub fn quad(&self) -> &BlockOperator {
        &self.quad
    }

    pub fn linear(&self) -> &BlockVector {
        &self.linear
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn majorizer_mode(&self) -> MajorizerMode {
        self.majorizer_mode
    }

    pub fn minorizer_mode(&self) -> MinorizerMode {
        self.minorizer_mode
    }

    /// `Σ̂`
    pub fn sigma_hat(&self) -> &BlockOperator {
        &self.sigma_hat
    }

    /// `Σ`
    pub fn sigma(&self) -> &BlockOperator {
        &self.sigma
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(self.quad.matrix() * x)) + self.linear.data().dot(x) + self.constant
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.quad.matrix() * x + self.linear.data()
    }

    /// `f(x') + <∇f(x'), x - x'> + 1/2 ||x - x'||²_Σ̂`
    pub fn majorizer(&self, x: &DVector<f64>, anchor: &DVector<f64>) -> f64 {
        let d = x - anchor;
        self.value(anchor) + self.gradient(anchor).dot(&d) + 0.5 * d.dot(&(self.sigma_hat.matrix() * &d))
    }

    /// `f(x') + <∇f(x'), x - x'> + 1/2 ||x - x'||²_Σ`
    pub fn minorizer(&self, x: &DVector<f64>, anchor: &DVector<f64>) -> f64 {
        let d = x - anchor;
        self.value(anchor) + self.gradient(anchor).dot(&d) + 0.5 * d.dot(&(self.sigma.matrix() * &d))
    }

    /// Smallest eigenvalues of `Σ̂ - Q` and `Q - Σ`.
    pub fn sandwich_margins(&self) -> (f64, f64) {
        let q = self.quad.matrix();
        (
            min_eig_mat(&(self.sigma_hat.matrix() - q)),
            min_eig_mat(&(q - self.sigma.matrix())),
        )
    }
}

/// Scaled KKT residual of a primal-dual triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResidual {
    pub primal: f64,
    pub dual_x: f64,
    pub dual_y: f64,
    pub total: f64,
}

/// Multi-block convex composite program with linear coupling.
///
/// The coupling maps are stored through their adjoints: `a_adj` is the
/// `z_dim x x_dim` matrix of `A*` and `b_adj` the `z_dim x y_dim` matrix of
/// `B*`, so the constraint reads `a_adj x + b_adj y = c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    x_structure: BlockStructure,
    y_structure: BlockStructure,
    z_structure: BlockStructure,
    p1: ProxFriendlyFunction,
    q1: ProxFriendlyFunction,
    f: SmoothConvexFunction,
    g: SmoothConvexFunction,
    a_adj: DMatrix<f64>,
    b_adj: DMatrix<f64>,
    c: DVector<f64>,
}

impl ProblemSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        x_structure: BlockStructure,
        y_structure: BlockStructure,
        z_dim: usize,
        p1: ProxFriendlyFunction,
        q1: ProxFriendlyFunction,
        f: SmoothConvexFunction,
        g: SmoothConvexFunction,
        a_adj: DMatrix<f64>,
        b_adj: DMatrix<f64>,
        c: DVector<f64>,
    ) -> Result<Self> {
        let z_structure = BlockStructure::single(z_dim)?;
        let (nx, ny) = (x_structure.total_dim(), y_structure.total_dim());
        let mismatch = |what: &str| Err(Error::DimensionMismatch(what.to_string()));
        if p1.dim() != x_structure.block_dim(0) {
            return mismatch("p1 dimension differs from x block 1");
        }
        if q1.dim() != y_structure.block_dim(0) {
            return mismatch("q1 dimension differs from y block 1");
        }
        if f.structure() != &x_structure {
            return mismatch("f is not defined on the x block structure");
        }
        if g.structure() != &y_structure {
            return mismatch("g is not defined on the y block structure");
        }
        if a_adj.shape() != (z_dim, nx) {
            return mismatch("A has the wrong shape (expected z_dim x x_dim)");
        }
        if b_adj.shape() != (z_dim, ny) {
            return mismatch("B has the wrong shape (expected z_dim x y_dim)");
        }
        if c.len() != z_dim {
            return mismatch("c has the wrong length");
        }
        Ok(Self {
            x_structure,
            y_structure,
            z_structure,
            p1,
            q1,
            f,
            g,
            a_adj,
            b_adj,
            c,
        })
    }

    pub fn x_structure(&self) -> &BlockStructure {
        &self.x_structure
    }
    pub fn y_structure(&self) -> &BlockStructure {
        &self.y_structure
    }
    pub fn z_structure(&self) -> &BlockStructure {
        &self.z_structure
    }
    pub fn x_dim(&self) -> usize {
        self.x_structure.total_dim()
    }
    pub fn y_dim(&self) -> usize {
        self.y_structure.total_dim()
    }
    pub fn z_dim(&self) -> usize {
        self.z_structure.total_dim()
    }
    pub fn p1(&self) -> &ProxFriendlyFunction {
        &self.p1
    }
    pub fn q1(&self) -> &ProxFriendlyFunction {
        &self.q1
    }
    pub fn f(&self) -> &SmoothConvexFunction {
        &self.f
    }
    pub fn g(&self) -> &SmoothConvexFunction {
        &self.g
    }
    /// Matrix of `A*` (`z_dim x x_dim`).
    pub fn a_adj(&self) -> &DMatrix<f64> {
        &self.a_adj
    }
    /// Matrix of `B*` (`z_dim x y_dim`).
    pub fn b_adj(&self) -> &DMatrix<f64> {
        &self.b_adj
    }
    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    /// `A A*` on X.
    pub fn aat(&self) -> DMatrix<f64> {
        self.a_adj.transpose() * &self.a_adj
    }

    /// `B B*` on Y.
    pub fn bbt(&self) -> DMatrix<f64> {
        self.b_adj.transpose() * &self.b_adj
    }

    /// `A* x + B* y - c`
    pub fn residual(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        &self.a_adj * x + &self.b_adj * y - &self.c
    }

    pub fn p_value(&self, x: &DVector<f64>) -> f64 {
        self.p1.value(&block1(x, &self.x_structure))
    }

    pub fn q_value(&self, y: &DVector<f64>) -> f64 {
        self.q1.value(&block1(y, &self.y_structure))
    }

    pub fn objective(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        self.p_value(x) + self.f.value(x) + self.q_value(y) + self.g.value(y)
    }

    /// Prox of `t p` on X (identity off block 1).
    pub fn prox_p(&self, t: f64, v: &DVector<f64>) -> Result<DVector<f64>> {
        prox_on_block1(&self.p1, &self.x_structure, t, v)
    }

    pub fn prox_q(&self, t: f64, v: &DVector<f64>) -> Result<DVector<f64>> {
        prox_on_block1(&self.q1, &self.y_structure, t, v)
    }

    /// Majorized (proximal) augmented Lagrangian
    /// `p(x) + f̂(x;x') + q(y) + ĝ(y;y') + <z', r> + σ/2 ||r||²`, with
    /// `r = A*x + B*y - c`, plus `1/2||x-x'||²_S + 1/2||y-y'||²_T` when
    /// proximal operators are given. Returns `+inf` outside `dom p × dom q`.
    pub fn majorized_aug_lagrangian(
        &self,
        sigma: f64,
        x: &DVector<f64>,
        y: &DVector<f64>,
        anchor: (&DVector<f64>, &DVector<f64>, &DVector<f64>),
        proximal: Option<(&BlockOperator, &BlockOperator)>,
    ) -> f64 {
        let (xa, ya, za) = anchor;
        let pq = self.p_value(x) + self.q_value(y);
        if !pq.is_finite() {
            return f64::INFINITY;
        }
        let r = self.residual(x, y);
        let mut val = pq
            + self.f.majorizer(x, xa)
            + self.g.majorizer(y, ya)
            + za.dot(&r)
            + 0.5 * sigma * r.norm_squared();
        if let Some((s, t)) = proximal {
            let dx = x - xa;
            let dy = y - ya;
            val += 0.5 * dx.dot(&(s.matrix() * &dx)) + 0.5 * dy.dot(&(t.matrix() * &dy));
        }
        val
    }

    /// Natural-map KKT residual, each part relatively scaled.
    pub fn kkt_residual(&self, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> KktResidual {
        let primal = self.residual(x, y).norm() / (1.0 + self.c.norm());
        let gx = self.f.gradient(x) + self.a_adj.transpose() * z;
        let gy = self.g.gradient(y) + self.b_adj.transpose() * z;
        let dual_x = match self.prox_p(1.0, &(x - gx)) {
            Ok(px) => (x - px).norm() / (1.0 + x.norm()),
            Err(_) => f64::INFINITY,
        };
        let dual_y = match self.prox_q(1.0, &(y - gy)) {
            Ok(py) => (y - py).norm() / (1.0 + y.norm()),
            Err(_) => f64::INFINITY,
        };
        KktResidual {
            primal,
            dual_x,
            dual_y,
            total: primal.max(dual_x).max(dual_y),
        }
    }

    /// Unscaled KKT residual used to certify reference points.
    pub fn kkt_residual_abs(&self, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> f64 {
        let primal = self.residual(x, y).amax();
        let gx = self.f.gradient(x) + self.a_adj.transpose() * z;
        let gy = self.g.gradient(y) + self.b_adj.transpose() * z;
        let dx = self.prox_p(1.0, &(x - gx)).map_or(f64::INFINITY, |p| (x - p).amax());
        let dy = self.prox_q(1.0, &(y - gy)).map_or(f64::INFINITY, |p| (y - p).amax());
        primal.max(dx).max(dy)
    }
}

pub(crate) fn block1(v: &DVector<f64>, s: &BlockStructure) -> DVector<f64> {
    v.rows(0, s.block_dim(0)).into_owned()
}

fn prox_on_block1(
    func: &ProxFriendlyFunction,
    s: &BlockStructure,
    t: f64,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_len(s.total_dim(), v.len(), "prox")?;
    let mut out = v.clone();
    let d1 = s.block_dim(0);
    let p = func.prox(t, &block1(v, s))?;
    out.rows_mut(0, d1).copy_from(&p);
    Ok(out)
}

/// `<u, v>_H` computed through the two polarization forms of the
/// parallelogram identity; both must agree with the direct inner product.
pub fn polarization_forms(u: &DVector<f64>, v: &DVector<f64>, h: &DMatrix<f64>) -> (f64, f64) {
    let n = |w: &DVector<f64>| w.dot(&(h * w));
    (
        0.5 * (n(u) + n(v) - n(&(u - v))),
        0.5 * (n(&(u + v)) - n(u) - n(v)),
    )
}

/// Convenience: wrap a full matrix as a self-adjoint operator on `s`.
pub fn sym_op(s: &BlockStructure, mat: DMatrix<f64>) -> Result<BlockOperator> {
    BlockOperator::symmetric(s.clone(), mat)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn tiny() -> ProblemSpec {
        let s = BlockStructure::single(1).unwrap();
        let f = SmoothConvexFunction::new(
            BlockOperator::identity(s.clone()),
            BlockVector::zeros(s.clone()),
            0.0,
            MajorizerMode::Tight,
            MinorizerMode::Zero,
        )
        .unwrap();
        ProblemSpec::new(
            s.clone(),
            s.clone(),
            1,
            ProxFriendlyFunction::zero(1),
            ProxFriendlyFunction::zero(1),
            f.clone(),
            f,
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            v(&[1.0]),
        )
        .unwrap()
    }

    #[test]
    fn prox_examples() {
        let z = ProxFriendlyFunction::zero(2);
        assert_eq!(z.prox(1.0, &v(&[2.0, -0.5])).unwrap(), v(&[2.0, -0.5]));
        let l1 = ProxFriendlyFunction::l1(2, 1.0).unwrap();
        let u = l1.prox(1.0, &v(&[2.0, -0.5])).unwrap();
        assert_eq!(u, v(&[1.0, 0.0]));
        // (v - u)/t ∈ ∂||.||_1(u)
        assert_eq!(l1.subgradient_violation(&u, &(v(&[2.0, -0.5]) - &u)), 0.0);
        let bx = ProxFriendlyFunction::box_indicator(vec![0.0; 3], vec![1.0; 3]).unwrap();
        let vv = v(&[-3.0, 0.4, 7.0]);
        let u = bx.prox(1.0, &vv).unwrap();
        assert_eq!(u, v(&[0.0, 0.4, 1.0]));
        assert_eq!(bx.subgradient_violation(&u, &(&vv - &u)), 0.0);
        assert!(l1.prox(0.0, &v(&[1.0, 1.0])).is_err());
        assert!(ProxFriendlyFunction::box_indicator(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn prox_quadratic_general_metric_satisfies_certificate() {
        let p = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, -0.7, 0.5, -0.7, 2.0]);
        let q = v(&[3.0, -0.2, -2.5]);
        for func in [
            ProxFriendlyFunction::l1(3, 0.8).unwrap(),
            ProxFriendlyFunction::box_indicator(vec![-0.5, -0.1, -1.0], vec![0.5, 0.1, 0.0]).unwrap(),
            ProxFriendlyFunction::zero(3),
        ] {
            let u = func.prox_quadratic(&p, &q).unwrap();
            let g = &q - &p * &u;
            assert!(func.subgradient_violation(&u, &g) < 1e-12, "{func:?} {u}");
        }
    }

    #[test]
    fn majorized_lagrangian_examples() {
        let spec = tiny();
        let x = v(&[0.3]);
        let y = v(&[0.7]);
        let zero = v(&[0.0]);
        let val = spec.majorized_aug_lagrangian(1.0, &x, &y, (&x, &y, &zero), None);
        assert!((val - (0.5 * 0.09 + 0.5 * 0.49)).abs() < 1e-15);
        let val2 = spec.majorized_aug_lagrangian(2.0, &x, &y, (&x, &y, &zero), None);
        assert_eq!(val, val2);
    }

    #[test]
    fn majorized_lagrangian_outside_domain_is_infinite() {
        let s = BlockStructure::single(1).unwrap();
        let mut spec = tiny();
        spec.p1 = ProxFriendlyFunction::box_indicator(vec![0.0], vec![1.0]).unwrap();
        let _ = s;
        let x = v(&[2.0]);
        let y = v(&[0.0]);
        let val = spec.majorized_aug_lagrangian(1.0, &x, &y, (&x, &y, &v(&[0.0])), None);
        assert!(val.is_infinite());
    }

    #[test]
    fn kkt_examples() {
        let spec = tiny();
        let r = spec.kkt_residual(&v(&[0.5]), &v(&[0.5]), &v(&[-0.5]));
        assert!(r.total <= 1e-12);
        let r = spec.kkt_residual(&v(&[0.0]), &v(&[0.0]), &v(&[0.0]));
        assert!((r.primal - 0.5).abs() < 1e-15);
        let r = spec.kkt_residual(&v(&[0.5]), &v(&[0.5]), &v(&[0.5]));
        assert!(r.primal < 1e-15);
        assert!(r.dual_x > 0.0 && r.dual_y > 0.0);
    }

    #[test]
    fn polarization_agrees() {
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let (a, b) = polarization_forms(&v(&[1.0, -2.0]), &v(&[0.5, 3.0]), &h);
        let direct = v(&[1.0, -2.0]).dot(&(&h * v(&[0.5, 3.0])));
        assert!((a - direct).abs() < 1e-12 && (b - direct).abs() < 1e-12);
    }
}
