//! Dense block-structured linear algebra.
//!
//! Every operator in the solver is a small dense matrix carrying the block
//! partition of its domain and codomain. The partition matters for the
//! diagonal / strictly-upper splitting used by the symmetric Gauss-Seidel
//! machinery; everything else is plain dense algebra on top of `nalgebra`.

use std::ops::Range;

use nalgebra::{Cholesky, DMatrix, DVector, DVectorView, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative Frobenius tolerance for accepting a matrix as self-adjoint.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Eigenvalues down to `-PSD_TOL * ||H||` are treated as zero.
pub const PSD_TOL: f64 = 1e-10;
/// `spd_solve` requires `min_eig > SPD_TOL * ||H||`.
pub const SPD_TOL: f64 = 1e-12;

/// Ordered list of block dimensions partitioning a vector space.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BlockStructure {
    dims: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockStructure {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidStructure("no blocks".into()));
        }
        if let Some(i) = dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidStructure(format!("block {i} has dimension 0")));
        }
        let mut offsets = Vec::with_capacity(dims.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for &d in &dims {
            acc += d;
            offsets.push(acc);
        }
        Ok(Self { dims, offsets })
    }

    /// A space with a single block.
    pub fn single(dim: usize) -> Result<Self> {
        Self::new(vec![dim])
    }

    pub fn num_blocks(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn block_dim(&self, i: usize) -> usize {
        self.dims[i]
    }

    pub fn total_dim(&self) -> usize {
        self.offsets[self.dims.len()]
    }

    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    /// Coordinate range of block `i`.
    pub fn range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }
}

/// A vector partitioned according to a [`BlockStructure`].
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    structure: BlockStructure,
    data: DVector<f64>,
}

impl BlockVector {
    pub fn new(structure: BlockStructure, data: DVector<f64>) -> Result<Self> {
        if data.len() != structure.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} for structure of total dimension {}",
                data.len(),
                structure.total_dim()
            )));
        }
        Ok(Self { structure, data })
    }

    pub fn from_slice(structure: BlockStructure, values: &[f64]) -> Result<Self> {
        Self::new(structure, DVector::from_column_slice(values))
    }

    pub fn zeros(structure: BlockStructure) -> Self {
        let n = structure.total_dim();
        Self {
            structure,
            data: DVector::zeros(n),
        }
    }

    pub fn structure(&self) -> &BlockStructure {
        &self.structure
    }

    pub fn data(&self) -> &DVector<f64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut DVector<f64> {
        &mut self.data
    }

    pub fn into_data(self) -> DVector<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn num_blocks(&self) -> usize {
        self.structure.num_blocks()
    }

    pub fn block(&self, i: usize) -> DVectorView<'_, f64> {
        let r = self.structure.range(i);
        self.data.rows(r.start, r.len())
    }

    pub fn set_block(&mut self, i: usize, values: &DVector<f64>) {
        let r = self.structure.range(i);
        self.data.rows_mut(r.start, r.len()).copy_from(values);
    }

    pub fn norm(&self) -> f64 {
        self.data.norm()
    }

    pub fn dot(&self, other: &BlockVector) -> Result<f64> {
        check_len(self.len(), other.len(), "dot")?;
        Ok(self.data.dot(&other.data))
    }

    /// Same structure, new coordinates.
    pub fn with_data(&self, data: DVector<f64>) -> Result<Self> {
        Self::new(self.structure.clone(), data)
    }
}

/// A linear map between block-partitioned spaces, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOperator {
    rows: BlockStructure,
    cols: BlockStructure,
    mat: DMatrix<f64>,
    self_adjoint: bool,
}

impl BlockOperator {
    /// A general (rectangular) operator.
    pub fn new(rows: BlockStructure, cols: BlockStructure, mat: DMatrix<f64>) -> Result<Self> {
        if mat.nrows() != rows.total_dim() || mat.ncols() != cols.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix for {}x{} block structure",
                mat.nrows(),
                mat.ncols(),
                rows.total_dim(),
                cols.total_dim()
            )));
        }
        Ok(Self {
            rows,
            cols,
            mat,
            self_adjoint: false,
        })
    }

    /// A self-adjoint operator. The matrix must be symmetric to within
    /// [`SYMMETRY_TOL`] relative Frobenius error; it is then symmetrized.
    pub fn symmetric(structure: BlockStructure, mat: DMatrix<f64>) -> Result<Self> {
        if mat.nrows() != structure.total_dim() || mat.ncols() != structure.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix for square structure of dimension {}",
                mat.nrows(),
                mat.ncols(),
                structure.total_dim()
            )));
        }
        let asym = relative_asymmetry(&mat);
        if asym > SYMMETRY_TOL {
            return Err(Error::NotSelfAdjoint(asym));
        }
        let mat = symmetrize(&mat);
        Ok(Self {
            rows: structure.clone(),
            cols: structure,
            mat,
            self_adjoint: true,
        })
    }

    pub fn identity(structure: BlockStructure) -> Self {
        let n = structure.total_dim();
        Self {
            rows: structure.clone(),
            cols: structure,
            mat: DMatrix::identity(n, n),
            self_adjoint: true,
        }
    }

    pub fn zeros_square(structure: BlockStructure) -> Self {
        let n = structure.total_dim();
        Self {
            rows: structure.clone(),
            cols: structure,
            mat: DMatrix::zeros(n, n),
            self_adjoint: true,
        }
    }

    pub fn from_diagonal(structure: BlockStructure, diag: &[f64]) -> Result<Self> {
        check_len(structure.total_dim(), diag.len(), "diagonal")?;
        let mat = DMatrix::from_diagonal(&DVector::from_column_slice(diag));
        Ok(Self {
            rows: structure.clone(),
            cols: structure,
            mat,
            self_adjoint: true,
        })
    }

    pub fn row_structure(&self) -> &BlockStructure {
        &self.rows
    }

    pub fn col_structure(&self) -> &BlockStructure {
        &self.cols
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }

    pub fn is_self_adjoint(&self) -> bool {
        self.self_adjoint
    }

    /// Block `(i, j)` as an owned matrix.
    pub fn block(&self, i: usize, j: usize) -> DMatrix<f64> {
        let r = self.rows.range(i);
        let c = self.cols.range(j);
        self.mat.view((r.start, c.start), (r.len(), c.len())).into_owned()
    }

    pub fn apply(&self, v: &BlockVector) -> Result<BlockVector> {
        check_len(self.cols.total_dim(), v.len(), "apply")?;
        Ok(BlockVector {
            structure: self.rows.clone(),
            data: &self.mat * v.data(),
        })
    }

    pub fn adjoint(&self) -> BlockOperator {
        BlockOperator {
            rows: self.cols.clone(),
            cols: self.rows.clone(),
            mat: self.mat.transpose(),
            self_adjoint: self.self_adjoint,
        }
    }

    /// `self + other`; self-adjointness is kept when both are self-adjoint.
    pub fn add(&self, other: &BlockOperator) -> Result<BlockOperator> {
        self.check_same_shape(other)?;
        Ok(BlockOperator {
            rows: self.rows.clone(),
            cols: self.cols.clone(),
            mat: &self.mat + &other.mat,
            self_adjoint: self.self_adjoint && other.self_adjoint,
        })
    }

    pub fn sub(&self, other: &BlockOperator) -> Result<BlockOperator> {
        self.check_same_shape(other)?;
        Ok(BlockOperator {
            rows: self.rows.clone(),
            cols: self.cols.clone(),
            mat: &self.mat - &other.mat,
            self_adjoint: self.self_adjoint && other.self_adjoint,
        })
    }

    pub fn scale(&self, s: f64) -> BlockOperator {
        BlockOperator {
            rows: self.rows.clone(),
            cols: self.cols.clone(),
            mat: &self.mat * s,
            self_adjoint: self.self_adjoint,
        }
    }

    /// Composition `self ∘ other`. The result is not marked self-adjoint.
    pub fn compose(&self, other: &BlockOperator) -> Result<BlockOperator> {
        check_len(self.cols.total_dim(), other.rows.total_dim(), "compose")?;
        Ok(BlockOperator {
            rows: self.rows.clone(),
            cols: other.cols.clone(),
            mat: &self.mat * &other.mat,
            self_adjoint: false,
        })
    }

    /// Rebuild as a self-adjoint operator on the row structure, checking symmetry.
    pub fn into_symmetric(self) -> Result<BlockOperator> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch(
                "row and column structures differ".into(),
            ));
        }
        BlockOperator::symmetric(self.rows, self.mat)
    }

    fn check_same_shape(&self, other: &BlockOperator) -> Result<()> {
        if self.rows.total_dim() != other.rows.total_dim()
            || self.cols.total_dim() != other.cols.total_dim()
        {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.mat.nrows(),
                self.mat.ncols(),
                other.mat.nrows(),
                other.mat.ncols()
            )));
        }
        Ok(())
    }

    fn require_self_adjoint(&self, _what: &str) -> Result<()> {
        if self.self_adjoint {
            Ok(())
        } else {
            Err(Error::NotSelfAdjoint(relative_asymmetry_or_inf(&self.mat)))
        }
    }
}

/// Block-diagonal part and strictly block-upper part of a self-adjoint operator.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSplit {
    pub diag: BlockOperator,
    pub upper: BlockOperator,
}

impl OperatorSplit {
    /// `diag + upper + upper^T`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.diag.matrix() + self.upper.matrix() + self.upper.matrix().transpose()
    }
}

/// Split `H = H_d + H_u + H_u^*` by copying blocks.
pub fn split(h: &BlockOperator) -> Result<OperatorSplit> {
    h.require_self_adjoint("split")?;
    let s = h.rows.num_blocks();
    let n = h.rows.total_dim();
    let mut diag = DMatrix::zeros(n, n);
    let mut upper = DMatrix::zeros(n, n);
    for i in 0..s {
        let ri = h.rows.range(i);
        for j in i..s {
            let rj = h.rows.range(j);
            let src = h.mat.view((ri.start, rj.start), (ri.len(), rj.len()));
            let target = if i == j { &mut diag } else { &mut upper };
            target
                .view_mut((ri.start, rj.start), (ri.len(), rj.len()))
                .copy_from(&src);
        }
    }
    Ok(OperatorSplit {
        diag: BlockOperator {
            rows: h.rows.clone(),
            cols: h.rows.clone(),
            mat: diag,
            self_adjoint: true,
        },
        upper: BlockOperator {
            rows: h.rows.clone(),
            cols: h.rows.clone(),
            mat: upper,
            self_adjoint: false,
        },
    })
}

/// `<u, H v>`.
pub fn weighted_inner(u: &BlockVector, v: &BlockVector, h: &BlockOperator) -> Result<f64> {
    check_len(h.cols.total_dim(), v.len(), "weighted_inner")?;
    check_len(h.rows.total_dim(), u.len(), "weighted_inner")?;
    Ok(u.data().dot(&(&h.mat * v.data())))
}

/// `sqrt(<u, H u>)`; tiny negative round-off is clamped to zero.
pub fn weighted_norm(u: &BlockVector, h: &BlockOperator) -> Result<f64> {
    Ok(weighted_inner(u, u, h)?.max(0.0).sqrt())
}

/// Eigenvalues in ascending order of a self-adjoint operator.
pub fn eigenvalues(h: &BlockOperator) -> Result<Vec<f64>> {
    h.require_self_adjoint("eigenvalues")?;
    let mut ev: Vec<f64> = sym_eigen(&h.mat).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

pub fn min_eig(h: &BlockOperator) -> Result<f64> {
    h.require_self_adjoint("min_eig")?;
    Ok(min_eig_mat(&h.mat))
}

pub fn max_eig(h: &BlockOperator) -> Result<f64> {
    h.require_self_adjoint("max_eig")?;
    Ok(max_eig_mat(&h.mat))
}

/// Largest singular value.
pub fn spectral_norm(h: &BlockOperator) -> f64 {
    spectral_norm_mat(&h.mat)
}

/// The unique self-adjoint PSD square root.
pub fn operator_sqrt(h: &BlockOperator) -> Result<BlockOperator> {
    h.require_self_adjoint("operator_sqrt")?;
    Ok(BlockOperator {
        rows: h.rows.clone(),
        cols: h.cols.clone(),
        mat: sqrt_psd_mat(&h.mat)?,
        self_adjoint: true,
    })
}

/// `H^{-1/2}` for positive definite `H`.
pub fn operator_inv_sqrt(h: &BlockOperator) -> Result<BlockOperator> {
    h.require_self_adjoint("operator_inv_sqrt")?;
    Ok(BlockOperator {
        rows: h.rows.clone(),
        cols: h.cols.clone(),
        mat: inv_sqrt_pd_mat(&h.mat)?,
        self_adjoint: true,
    })
}

/// Solve `H u = b` for positive definite `H`.
pub fn spd_solve(h: &BlockOperator, b: &BlockVector) -> Result<BlockVector> {
    h.require_self_adjoint("spd_solve")?;
    check_len(h.rows.total_dim(), b.len(), "spd_solve")?;
    let factor = SpdFactor::new(&h.mat)?;
    Ok(BlockVector {
        structure: h.cols.clone(),
        data: factor.solve(b.data()),
    })
}

/// A Cholesky factorization of a matrix verified to be positive definite.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
}

impl SpdFactor {
    pub fn new(mat: &DMatrix<f64>) -> Result<Self> {
        let norm = spectral_norm_mat(mat);
        let lo = min_eig_mat(mat);
        if mat.nrows() > 0 && (norm == 0.0 || lo <= SPD_TOL * norm) {
            return Err(Error::NotPositiveDefinite(format!(
                "min eigenvalue {lo:e} with norm {norm:e}"
            )));
        }
        let chol = Cholesky::new(mat.clone()).ok_or_else(|| {
            Error::NotPositiveDefinite("Cholesky factorization failed".to_string())
        })?;
        Ok(Self { chol })
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    /// `||H^{-1/2} d|| = sqrt(d^T H^{-1} d)`.
    pub fn inv_norm(&self, d: &DVector<f64>) -> f64 {
        d.dot(&self.solve(d)).max(0.0).sqrt()
    }
}

pub(crate) fn check_len(expected: usize, got: usize, what: &str) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch(format!(
            "{what}: expected {expected}, got {got}"
        )));
    }
    Ok(())
}

// --- matrix-level helpers shared across the crate ---

pub(crate) fn relative_asymmetry(mat: &DMatrix<f64>) -> f64 {
    let norm = mat.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (mat - mat.transpose()).norm() / norm
}

fn relative_asymmetry_or_inf(mat: &DMatrix<f64>) -> f64 {
    if mat.nrows() != mat.ncols() {
        f64::INFINITY
    } else {
        relative_asymmetry(mat)
    }
}

pub(crate) fn symmetrize(mat: &DMatrix<f64>) -> DMatrix<f64> {
    (mat + mat.transpose()) * 0.5
}

pub(crate) fn sym_eigen(mat: &DMatrix<f64>) -> SymmetricEigen<f64, Dyn> {
    SymmetricEigen::new(symmetrize(mat))
}

pub(crate) fn min_eig_mat(mat: &DMatrix<f64>) -> f64 {
    if mat.nrows() == 0 {
        return f64::INFINITY;
    }
    sym_eigen(mat).eigenvalues.min()
}

pub(crate) fn max_eig_mat(mat: &DMatrix<f64>) -> f64 {
    if mat.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    sym_eigen(mat).eigenvalues.max()
}

pub(crate) fn spectral_norm_mat(mat: &DMatrix<f64>) -> f64 {
    if mat.nrows() == 0 || mat.ncols() == 0 {
        return 0.0;
    }
    mat.clone().svd(false, false).singular_values.max()
}

/// Apply `g` to the spectrum of a symmetric matrix.
fn spectral_map(eig: &SymmetricEigen<f64, Dyn>, g: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let v = &eig.eigenvectors;
    let mapped = eig.eigenvalues.map(g);
    let scaled = v * DMatrix::from_diagonal(&mapped);
    symmetrize(&(scaled * v.transpose()))
}

pub(crate) fn sqrt_psd_mat(mat: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = sym_eigen(mat);
    let norm = eig.eigenvalues.amax();
    let lo = eig.eigenvalues.min();
    if lo < -PSD_TOL * norm {
        return Err(Error::NotPsd { min_eig: lo, norm });
    }
    Ok(spectral_map(&eig, |l| l.max(0.0).sqrt()))
}

pub(crate) fn inv_sqrt_pd_mat(mat: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = sym_eigen(mat);
    let norm = eig.eigenvalues.amax();
    let lo = eig.eigenvalues.min();
    if norm == 0.0 || lo <= SPD_TOL * norm {
        return Err(Error::NotPositiveDefinite(format!(
            "min eigenvalue {lo:e} with norm {norm:e}"
        )));
    }
    Ok(spectral_map(&eig, |l| 1.0 / l.sqrt()))
}
