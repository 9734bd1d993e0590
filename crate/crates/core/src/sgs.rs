//! Inexact block symmetric Gauss-Seidel decomposition.
//!
//! For `h(u) = 1/2 <u, Hu> - <b, u>` and a prox-friendly `θ` on block 1, one
//! backward pass over blocks `s..2` followed by a forward pass over `1..s`
//! returns the minimizer of
//!
//! ```text
//! θ(u1) + h(u) + 1/2 ||u - u⁻||²_{sGS(H)} - <d(δ̃, δ), u>
//! ```
//!
//! with `sGS(H) = H_u H_d⁻¹ H_u*` and `d(δ̃, δ) = δ + H_u H_d⁻¹ (δ - δ̃)`.
//! Each inner subproblem is solved exactly after subtracting its tolerance
//! vector, so the tolerance is an exact subgradient at the returned point.

use nalgebra::{DMatrix, DVector};

use crate::blockalg::{
    check_len, split, symmetrize, BlockOperator, BlockStructure, BlockVector, OperatorSplit,
    SpdFactor,
};
use crate::error::{Error, Result};
use crate::model::ProxFriendlyFunction;

/// `1/2 <u, Hu> - <b, u> + θ(u1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticBlockObjective {
    h: BlockOperator,
    b: BlockVector,
    theta: ProxFriendlyFunction,
}

impl QuadraticBlockObjective {
    pub fn new(h: BlockOperator, b: BlockVector, theta: ProxFriendlyFunction) -> Result<Self> {
        if !h.is_self_adjoint() {
            return Err(Error::NotSelfAdjoint(f64::NAN));
        }
        check_len(h.row_structure().total_dim(), b.len(), "objective linear term")?;
        check_len(h.row_structure().block_dim(0), theta.dim(), "theta dimension")?;
        Ok(Self { h, b, theta })
    }

    pub fn h(&self) -> &BlockOperator {
        &self.h
    }
    pub fn b(&self) -> &BlockVector {
        &self.b
    }
    pub fn theta(&self) -> &ProxFriendlyFunction {
        &self.theta
    }

    pub fn value(&self, u: &DVector<f64>) -> f64 {
        let d1 = self.h.row_structure().block_dim(0);
        0.5 * u.dot(&(self.h.matrix() * u)) - self.b.data().dot(u)
            + self.theta.value(&u.rows(0, d1).into_owned())
    }
}

/// Tolerance vectors `(δ̃, δ)` of one sweep; block 1 of `δ̃` always equals
/// block 1 of `δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTolerances {
    delta_tilde: BlockVector,
    delta: BlockVector,
}

impl SweepTolerances {
    /// Block 1 of `delta_tilde` is overwritten with block 1 of `delta`.
    pub fn new(mut delta_tilde: BlockVector, delta: BlockVector) -> Result<Self> {
        if delta_tilde.structure() != delta.structure() {
            return Err(Error::DimensionMismatch(
                "delta and delta_tilde have different block structures".into(),
            ));
        }
        delta_tilde.set_block(0, &delta.block(0).into_owned());
        Ok(Self { delta_tilde, delta })
    }

    pub fn zeros(structure: BlockStructure) -> Self {
        Self {
            delta_tilde: BlockVector::zeros(structure.clone()),
            delta: BlockVector::zeros(structure),
        }
    }

    pub fn delta_tilde(&self) -> &BlockVector {
        &self.delta_tilde
    }
    pub fn delta(&self) -> &BlockVector {
        &self.delta
    }
}

/// Output of one backward + forward sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Backward-pass values. Block 1 is never computed and carries `u⁻`'s block 1.
    pub u_tilde: BlockVector,
    pub u_plus: BlockVector,
}

fn check_diag_blocks(h: &DMatrix<f64>, s: &BlockStructure) -> Result<Vec<SpdFactor>> {
    (0..s.num_blocks())
        .map(|i| {
            let r = s.range(i);
            let hii = h.view((r.start, r.start), (r.len(), r.len())).into_owned();
            SpdFactor::new(&hii).map_err(|e| {
                Error::NotPositiveDefinite(format!("diagonal block {i} of H: {e}"))
            })
        })
        .collect()
}

/// Solves with `H_d` block by block.
fn solve_block_diag(factors: &[SpdFactor], s: &BlockStructure, v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(v.len());
    for (i, f) in factors.iter().enumerate() {
        let r = s.range(i);
        let sol = f.solve(&v.rows(r.start, r.len()).into_owned());
        out.rows_mut(r.start, r.len()).copy_from(&sol);
    }
    out
}

fn block_diag_inverse(factors: &[SpdFactor], s: &BlockStructure) -> DMatrix<f64> {
    let n = s.total_dim();
    let mut out = DMatrix::zeros(n, n);
    for (i, f) in factors.iter().enumerate() {
        let r = s.range(i);
        let inv = f.solve_mat(&DMatrix::identity(r.len(), r.len()));
        out.view_mut((r.start, r.start), (r.len(), r.len())).copy_from(&inv);
    }
    symmetrize(&out)
}

/// `sGS(H) = H_u H_d⁻¹ H_u*`.
pub fn sgs_operator(h: &BlockOperator) -> Result<BlockOperator> {
    let sp = split(h)?;
    let s = h.row_structure();
    let factors = check_diag_blocks(h.matrix(), s)?;
    let hu = sp.upper.matrix();
    let m = hu * block_diag_inverse(&factors, s) * hu.transpose();
    BlockOperator::symmetric(s.clone(), symmetrize(&m))
}

/// `Ĥ = (H_d + H_u) H_d⁻¹ (H_d + H_u*)`, which equals `H + sGS(H)`.
pub fn hat_operator(h: &BlockOperator) -> Result<BlockOperator> {
    let sp = split(h)?;
    let s = h.row_structure();
    let factors = check_diag_blocks(h.matrix(), s)?;
    let l = sp.diag.matrix() + sp.upper.matrix();
    let m = &l * block_diag_inverse(&factors, s) * l.transpose();
    BlockOperator::symmetric(s.clone(), symmetrize(&m))
}

/// `d(δ̃, δ) = δ + H_u H_d⁻¹ (δ - δ̃)`.
pub fn tilt_vector(tols: &SweepTolerances, split_h: &OperatorSplit) -> Result<BlockVector> {
    let s = split_h.diag.row_structure();
    check_len(s.total_dim(), tols.delta.len(), "tilt_vector")?;
    let factors = check_diag_blocks(split_h.diag.matrix(), s)?;
    let diff = tols.delta.data() - tols.delta_tilde.data();
    let d = tols.delta.data() + split_h.upper.matrix() * solve_block_diag(&factors, s, &diff);
    BlockVector::new(s.clone(), d)
}

/// Both sides of the tilt-vector error bound:
/// `lhs = ||Ĥ^{-1/2} d||`,
/// `rhs = ||H_d^{-1/2}(δ - δ̃)|| + ||H_d^{1/2}(H_d + H_u)⁻¹ δ̃||`.
pub fn theorem_iv_bound(
    tols: &SweepTolerances,
    split_h: &OperatorSplit,
    hat_h: &BlockOperator,
) -> Result<(f64, f64)> {
    let s = split_h.diag.row_structure();
    let factors = check_diag_blocks(split_h.diag.matrix(), s)?;
    let d = tilt_vector(tols, split_h)?;
    let lhs = SpdFactor::new(hat_h.matrix())?.inv_norm(d.data());
    let diff = tols.delta.data() - tols.delta_tilde.data();
    let t1 = diff.dot(&solve_block_diag(&factors, s, &diff)).max(0.0).sqrt();
    let l = split_h.diag.matrix() + split_h.upper.matrix();
    let v = solve_block_upper(&l, &factors, s, tols.delta_tilde.data());
    let t2 = v.dot(&(split_h.diag.matrix() * &v)).max(0.0).sqrt();
    Ok((lhs, t1 + t2))
}

/// Back substitution with the block upper-triangular `H_d + H_u`.
fn solve_block_upper(
    l: &DMatrix<f64>,
    factors: &[SpdFactor],
    s: &BlockStructure,
    rhs: &DVector<f64>,
) -> DVector<f64> {
    let mut out = DVector::zeros(rhs.len());
    for i in (0..s.num_blocks()).rev() {
        let r = s.range(i);
        let mut ri = rhs.rows(r.start, r.len()).into_owned();
        let tail = r.end;
        if tail < rhs.len() {
            let n_tail = rhs.len() - tail;
            ri -= l.view((r.start, tail), (r.len(), n_tail)) * out.rows(tail, n_tail);
        }
        let sol = factors[i].solve(&ri);
        out.rows_mut(r.start, r.len()).copy_from(&sol);
    }
    out
}

/// Per-block inner solve strategy for blocks `i >= 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerSolve {
    /// Exact solve of the tilted block subproblem.
    Exact,
    /// Conjugate gradients stopped once the block gradient norm falls below
    /// the tolerance; the final gradient is reported as the certificate.
    ConjugateGradient { tol: f64 },
}

/// Sweep output together with the certificates actually realized.
#[derive(Debug, Clone, PartialEq)]
pub struct CertifiedSweep {
    pub u_tilde: DVector<f64>,
    pub u_plus: DVector<f64>,
    pub delta_tilde: DVector<f64>,
    pub delta: DVector<f64>,
}

/// Reusable sweep for a fixed `H` and `θ`; caches the diagonal-block
/// factorizations.
#[derive(Debug, Clone)]
pub struct SgsSweeper {
    structure: BlockStructure,
    h: DMatrix<f64>,
    h11: DMatrix<f64>,
    factors: Vec<SpdFactor>,
    theta: ProxFriendlyFunction,
}

impl SgsSweeper {
    pub fn new(h: &BlockOperator, theta: ProxFriendlyFunction) -> Result<Self> {
        if !h.is_self_adjoint() {
            return Err(Error::NotSelfAdjoint(f64::NAN));
        }
        let structure = h.row_structure().clone();
        check_len(structure.block_dim(0), theta.dim(), "theta dimension")?;
        let factors = check_diag_blocks(h.matrix(), &structure)?;
        let d1 = structure.block_dim(0);
        Ok(Self {
            h11: h.matrix().view((0, 0), (d1, d1)).into_owned(),
            h: h.matrix().clone(),
            structure,
            factors,
            theta,
        })
    }

    pub fn structure(&self) -> &BlockStructure {
        &self.structure
    }

    /// `b_i + tilt_i - Σ_{j≠i} H_ij w_j`
    fn block_rhs(&self, i: usize, b: &DVector<f64>, tilt: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let r = self.structure.range(i);
        let n = w.len();
        let rows = self.h.view((r.start, 0), (r.len(), n));
        let mut full = rows * w;
        full -= self.h.view((r.start, r.start), (r.len(), r.len())) * w.rows(r.start, r.len());
        b.rows(r.start, r.len()) + tilt.rows(r.start, r.len()) - full
    }

    fn solve_block(&self, i: usize, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        if i == 0 {
            self.theta.prox_quadratic(&self.h11, rhs)
        } else {
            Ok(self.factors[i].solve(rhs))
        }
    }

    /// One backward + forward sweep with prescribed tolerance vectors.
    pub fn sweep(
        &self,
        b: &DVector<f64>,
        u_prev: &DVector<f64>,
        delta_tilde: &DVector<f64>,
        delta: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        let n = self.structure.total_dim();
        check_len(n, b.len(), "sweep b")?;
        check_len(n, u_prev.len(), "sweep u_prev")?;
        check_len(n, delta_tilde.len(), "sweep delta_tilde")?;
        check_len(n, delta.len(), "sweep delta")?;
        let s = self.structure.num_blocks();
        let mut w = u_prev.clone();
        for i in (1..s).rev() {
            let rhs = self.block_rhs(i, b, delta_tilde, &w);
            let ui = self.solve_block(i, &rhs)?;
            w.rows_mut(self.structure.offset(i), ui.len()).copy_from(&ui);
        }
        let u_tilde = w.clone();
        for i in 0..s {
            let rhs = self.block_rhs(i, b, delta, &w);
            let ui = self.solve_block(i, &rhs)?;
            w.rows_mut(self.structure.offset(i), ui.len()).copy_from(&ui);
        }
        Ok((u_tilde, w))
    }

    /// Sweep whose blocks `i >= 2` are solved by the given inner strategy.
    /// Block 1 is solved exactly with tilt `delta1`. Returns the realized
    /// certificates (with `δ̃_1 = δ_1`).
    pub fn sweep_inner(
        &self,
        b: &DVector<f64>,
        u_prev: &DVector<f64>,
        delta1: &DVector<f64>,
        inner: InnerSolve,
    ) -> Result<CertifiedSweep> {
        let n = self.structure.total_dim();
        check_len(n, b.len(), "sweep b")?;
        check_len(n, u_prev.len(), "sweep u_prev")?;
        check_len(self.structure.block_dim(0), delta1.len(), "sweep delta1")?;
        let s = self.structure.num_blocks();
        let zero = DVector::zeros(n);
        let mut delta_tilde = DVector::zeros(n);
        let mut delta = DVector::zeros(n);
        delta.rows_mut(0, delta1.len()).copy_from(delta1);
        delta_tilde.rows_mut(0, delta1.len()).copy_from(delta1);

        let mut w = u_prev.clone();
        for i in (1..s).rev() {
            let rhs = self.block_rhs(i, b, &zero, &w);
            let r = self.structure.range(i);
            let (ui, cert) = self.inner_block(i, &rhs, &w.rows(r.start, r.len()).into_owned(), inner);
            w.rows_mut(r.start, r.len()).copy_from(&ui);
            delta_tilde.rows_mut(r.start, r.len()).copy_from(&cert);
        }
        let u_tilde = w.clone();
        for i in 0..s {
            let r = self.structure.range(i);
            if i == 0 {
                let rhs = self.block_rhs(0, b, &delta, &w);
                let u1 = self.solve_block(0, &rhs)?;
                w.rows_mut(0, u1.len()).copy_from(&u1);
            } else {
                let rhs = self.block_rhs(i, b, &zero, &w);
                let (ui, cert) =
                    self.inner_block(i, &rhs, &w.rows(r.start, r.len()).into_owned(), inner);
                w.rows_mut(r.start, r.len()).copy_from(&ui);
                delta.rows_mut(r.start, r.len()).copy_from(&cert);
            }
        }
        Ok(CertifiedSweep {
            u_tilde,
            u_plus: w,
            delta_tilde,
            delta,
        })
    }

    /// Solve `H_ii u = rhs`; the certificate is the block gradient `H_ii u - rhs`.
    fn inner_block(
        &self,
        i: usize,
        rhs: &DVector<f64>,
        warm: &DVector<f64>,
        inner: InnerSolve,
    ) -> (DVector<f64>, DVector<f64>) {
        let r = self.structure.range(i);
        let hii = self.h.view((r.start, r.start), (r.len(), r.len())).into_owned();
        let u = match inner {
            InnerSolve::ConjugateGradient { tol } if tol > 0.0 => conjugate_gradient(&hii, rhs, warm, tol),
            _ => self.factors[i].solve(rhs),
        };
        let cert = &hii * &u - rhs;
        (u, cert)
    }
}

/// Plain CG on a small SPD system, stopping when `||A u - b|| <= tol`.
pub fn conjugate_gradient(a: &DMatrix<f64>, b: &DVector<f64>, x0: &DVector<f64>, tol: f64) -> DVector<f64> {
    let mut x = x0.clone();
    let mut r = b - a * &x;
    let mut p = r.clone();
    let mut rs = r.norm_squared();
    let max_iter = 10 * b.len().max(1);
    for _ in 0..max_iter {
        if rs.sqrt() <= tol {
            break;
        }
        let ap = a * &p;
        let denom = p.dot(&ap);
        if denom <= 0.0 {
            break;
        }
        let alpha = rs / denom;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        let rs_new = r.norm_squared();
        p = &r + &p * (rs_new / rs);
        rs = rs_new;
    }
    x
}

/// Run one inexact sGS sweep on `obj` from `u_prev`.
pub fn sgs_sweep(
    obj: &QuadraticBlockObjective,
    u_prev: &BlockVector,
    tols: &SweepTolerances,
) -> Result<SweepResult> {
    let sweeper = SgsSweeper::new(&obj.h, obj.theta.clone())?;
    let (ut, up) = sweeper.sweep(
        obj.b.data(),
        u_prev.data(),
        tols.delta_tilde.data(),
        tols.delta.data(),
    )?;
    let st = obj.h.row_structure().clone();
    Ok(SweepResult {
        u_tilde: BlockVector::new(st.clone(), ut)?,
        u_plus: BlockVector::new(st, up)?,
    })
}

/// Minimizer of the sGS proximal problem for `θ = 0`, solved directly:
/// `Ĥ u = b + sGS(H) u⁻ + d`.
pub fn proximal_problem_direct(
    obj: &QuadraticBlockObjective,
    u_prev: &BlockVector,
    tols: &SweepTolerances,
) -> Result<BlockVector> {
    if !obj.theta.is_zero() {
        return Err(Error::Unsupported(
            "direct proximal solve handles θ = 0 only".into(),
        ));
    }
    let sgs = sgs_operator(&obj.h)?;
    let hat = hat_operator(&obj.h)?;
    let d = tilt_vector(tols, &split(&obj.h)?)?;
    let rhs = obj.b.data() + sgs.matrix() * u_prev.data() + d.data();
    BlockVector::new(obj.h.row_structure().clone(), SpdFactor::new(hat.matrix())?.solve(&rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(d: &[usize]) -> BlockStructure {
        BlockStructure::new(d.to_vec()).unwrap()
    }
    fn sym(d: &[usize], rows: &[f64]) -> BlockOperator {
        let s = st(d);
        let n = s.total_dim();
        BlockOperator::symmetric(s, DMatrix::from_row_slice(n, n, rows)).unwrap()
    }
    fn bv(d: &[usize], v: &[f64]) -> BlockVector {
        BlockVector::from_slice(st(d), v).unwrap()
    }

    #[test]
    fn sgs_operator_examples() {
        let z = sgs_operator(&sym(&[2], &[2.0, 1.0, 1.0, 2.0])).unwrap();
        assert_eq!(z.matrix(), &DMatrix::zeros(2, 2));
        let h = sym(&[1, 1], &[2.0, 1.0, 1.0, 2.0]);
        let g = sgs_operator(&h).unwrap();
        assert!((g.matrix() - DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0])).amax() < 1e-15);
    }

    #[test]
    fn hat_operator_examples() {
        let h = sym(&[1, 1], &[2.0, 1.0, 1.0, 2.0]);
        let hat = hat_operator(&h).unwrap();
        assert!((hat.matrix() - DMatrix::from_row_slice(2, 2, &[2.5, 1.0, 1.0, 2.0])).amax() < 1e-15);
        let d = sym(&[1, 1], &[3.0, 0.0, 0.0, 5.0]);
        assert!((hat_operator(&d).unwrap().matrix() - d.matrix()).amax() < 1e-14);
    }

    #[test]
    fn singular_diagonal_block_is_rejected() {
        let h = sym(&[1, 1], &[0.0, 0.0, 0.0, 1.0]);
        assert!(matches!(sgs_operator(&h), Err(Error::NotPositiveDefinite(_))));
        assert!(hat_operator(&h).is_err());
    }

    #[test]
    fn tilt_vector_examples() {
        let h = sym(&[1, 1], &[2.0, 1.0, 1.0, 2.0]);
        let sp = split(&h).unwrap();
        let same = SweepTolerances::new(bv(&[1, 1], &[0.3, -0.2]), bv(&[1, 1], &[0.3, -0.2])).unwrap();
        assert_eq!(tilt_vector(&same, &sp).unwrap().data(), same.delta().data());
        let zero = SweepTolerances::zeros(st(&[1, 1]));
        assert_eq!(tilt_vector(&zero, &sp).unwrap().norm(), 0.0);
        let t = SweepTolerances::new(bv(&[1, 1], &[0.0, 0.0]), bv(&[1, 1], &[0.0, 1.0])).unwrap();
        let d = tilt_vector(&t, &sp).unwrap();
        assert!((d.data() - DVector::from_column_slice(&[0.5, 1.0])).amax() < 1e-15);
    }

    #[test]
    fn tolerances_force_shared_first_block() {
        let t = SweepTolerances::new(bv(&[1, 1], &[9.0, 2.0]), bv(&[1, 1], &[1.0, 3.0])).unwrap();
        assert_eq!(t.delta_tilde().data()[0], 1.0);
        assert_eq!(t.delta_tilde().data()[1], 2.0);
    }

    #[test]
    fn sweep_hand_solved_example() {
        let h = sym(&[1, 1], &[2.0, 1.0, 1.0, 2.0]);
        let obj = QuadraticBlockObjective::new(h, bv(&[1, 1], &[1.0, 1.0]), ProxFriendlyFunction::zero(1)).unwrap();
        let r = sgs_sweep(&obj, &bv(&[1, 1], &[0.0, 0.0]), &SweepTolerances::zeros(st(&[1, 1]))).unwrap();
        assert!((r.u_tilde.data()[1] - 0.5).abs() < 1e-15);
        assert!((r.u_plus.data() - DVector::from_column_slice(&[0.25, 0.375])).amax() < 1e-15);
    }

    #[test]
    fn sweep_on_diagonal_h_is_a_single_solve() {
        let h = sym(&[1, 2], &[2.0, 0.0, 0.0, 0.0, 4.0, 0.0, 0.0, 0.0, 5.0]);
        let b = bv(&[1, 2], &[1.0, 2.0, 10.0]);
        let obj = QuadraticBlockObjective::new(h, b, ProxFriendlyFunction::zero(1)).unwrap();
        let r = sgs_sweep(&obj, &bv(&[1, 2], &[7.0, -3.0, 2.0]), &SweepTolerances::zeros(st(&[1, 2]))).unwrap();
        assert!((r.u_plus.data() - DVector::from_column_slice(&[0.5, 0.5, 2.0])).amax() < 1e-15);
    }

    #[test]
    fn sweep_matches_direct_proximal_problem() {
        let h = sym(&[1, 1], &[2.0, 1.0, 1.0, 2.0]);
        let obj = QuadraticBlockObjective::new(h, bv(&[1, 1], &[1.0, -2.0]), ProxFriendlyFunction::zero(1)).unwrap();
        let u_prev = bv(&[1, 1], &[0.7, 0.1]);
        for tols in [
            SweepTolerances::zeros(st(&[1, 1])),
            SweepTolerances::new(bv(&[1, 1], &[0.0, 0.05]), bv(&[1, 1], &[0.02, -0.03])).unwrap(),
        ] {
            let sweep = sgs_sweep(&obj, &u_prev, &tols).unwrap();
            let direct = proximal_problem_direct(&obj, &u_prev, &tols).unwrap();
            assert!((sweep.u_plus.data() - direct.data()).amax() < 1e-13);
        }
    }

    #[test]
    fn bound_examples() {
        let h = sym(&[1, 1], &[2.0, 1.0, 1.0, 2.0]);
        let sp = split(&h).unwrap();
        let hat = hat_operator(&h).unwrap();
        let (l, r) = theorem_iv_bound(&SweepTolerances::zeros(st(&[1, 1])), &sp, &hat).unwrap();
        assert_eq!((l, r), (0.0, 0.0));
        let d = bv(&[1, 1], &[0.4, -0.9]);
        let t = SweepTolerances::new(d.clone(), d.clone()).unwrap();
        let (l, r) = theorem_iv_bound(&t, &sp, &hat).unwrap();
        // lhs = ||Ĥ^{-1/2} δ||, rhs = ||H_d^{1/2} (H_d + H_u)^{-1} δ||, by hand
        let hat_inv = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.5]) / 4.0;
        let lhs_hand = d.data().dot(&(&hat_inv * d.data())).sqrt();
        let v: DVector<f64> = DVector::from_column_slice(&[(0.4 - (-0.9 / 2.0)) / 2.0, -0.9 / 2.0]);
        let rhs_hand: f64 = (2.0 * v[0] * v[0] + 2.0 * v[1] * v[1]).sqrt();
        assert!((l - lhs_hand).abs() < 1e-14);
        assert!((r - rhs_hand).abs() < 1e-14);
        assert!(l <= r + 1e-10);
    }

    #[test]
    fn cg_inner_mode_reports_exact_certificates() {
        let h = sym(&[1, 2, 2], &[
            4.0, 1.0, 0.5, 0.2, 0.0,
            1.0, 5.0, 1.0, 0.3, 0.1,
            0.5, 1.0, 6.0, 0.0, 0.4,
            0.2, 0.3, 0.0, 3.0, 1.0,
            0.0, 0.1, 0.4, 1.0, 4.0,
        ]);
        let sweeper = SgsSweeper::new(&h, ProxFriendlyFunction::zero(1)).unwrap();
        let b = DVector::from_column_slice(&[1.0, -1.0, 2.0, 0.5, 3.0]);
        let u_prev = DVector::from_column_slice(&[0.1, 0.2, 0.3, 0.4, 0.5]);
        let cs = sweeper
            .sweep_inner(&b, &u_prev, &DVector::zeros(1), InnerSolve::ConjugateGradient { tol: 1e-3 })
            .unwrap();
        // replaying the sweep with the realized certificates reproduces it
        let (ut, up) = sweeper.sweep(&b, &u_prev, &cs.delta_tilde, &cs.delta).unwrap();
        assert!((ut - &cs.u_tilde).amax() < 1e-12);
        assert!((up - &cs.u_plus).amax() < 1e-12);
        for i in 1..3 {
            let r = sweeper.structure().range(i);
            assert!(cs.delta.rows(r.start, r.len()).norm() <= 1e-3 + 1e-15);
            assert!(cs.delta_tilde.rows(r.start, r.len()).norm() <= 1e-3 + 1e-15);
        }
    }
}
