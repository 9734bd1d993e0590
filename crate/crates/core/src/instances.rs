//! Deterministic test problems and an active-set oracle.
//!
//! Random instances use strongly convex quadratics with prescribed
//! log-uniform spectra and a right-hand side `c = A*x* + B*y*` built from a
//! sampled point, so a KKT point always exists. The oracle enumerates
//! the sign / bound patterns of the nonsmooth block-1 coordinates and solves
//! one equality-constrained saddle system per pattern.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::blockalg::{symmetrize, BlockOperator, BlockStructure, BlockVector};
use crate::error::{Error, Result};
use crate::model::{MajorizerMode, MinorizerMode, ProblemSpec, ProxFriendlyFunction, SmoothConvexFunction};
use crate::parallel::{map_range, Execution};

/// Nonsmooth term on block 1, with uniform parameters across coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProxKind {
    Zero,
    L1 { weight: f64 },
    Box { lo: f64, hi: f64 },
}

impl ProxKind {
    pub fn build(self, dim: usize) -> Result<ProxFriendlyFunction> {
        match self {
            Self::Zero => Ok(ProxFriendlyFunction::zero(dim)),
            Self::L1 { weight } => ProxFriendlyFunction::l1(dim, weight),
            Self::Box { lo, hi } => ProxFriendlyFunction::box_indicator(vec![lo; dim], vec![hi; dim]),
        }
    }
}

/// Knobs of a randomly generated instance.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomPreset {
    pub x_dims: Vec<usize>,
    pub y_dims: Vec<usize>,
    pub z_dim: usize,
    pub p1: ProxKind,
    pub q1: ProxKind,
    /// Eigenvalue range of `Q_f` and `Q_g`, sampled log-uniformly.
    pub eig_range: (f64, f64),
    pub majorizer: MajorizerMode,
    pub minorizer: MinorizerMode,
    pub seed: u64,
}

/// A named instance recipe.
#[derive(Debug, Clone, PartialEq)]
pub enum InstancePreset {
    /// `min 1/2 x² + 1/2 y²  s.t.  x + y = 1`
    Tiny,
    /// `min |x| + 1/2 (x-2)² + 1/2 y²  s.t.  x + y = 2`
    Lasso1,
    /// `min 1/2 (x-3)² + 1/2 y²  s.t.  x + y = 2,  x ∈ [0, 1]`
    Box1,
    Random { name: String, knobs: RandomPreset },
}

pub const PRESET_NAMES: &[&str] = &["tiny", "lasso1", "box1", "threeby2", "stress", "twobytwo"];

impl InstancePreset {
    pub fn by_name(name: &str) -> Result<Self> {
        let random = |knobs| Ok(Self::Random { name: name.to_string(), knobs });
        match name {
            "tiny" => Ok(Self::Tiny),
            "lasso1" => Ok(Self::Lasso1),
            "box1" => Ok(Self::Box1),
            "threeby2" => random(RandomPreset {
                x_dims: vec![2, 2, 1],
                y_dims: vec![2, 1],
                z_dim: 3,
                p1: ProxKind::L1 { weight: 0.5 },
                q1: ProxKind::Box { lo: -1.0, hi: 1.0 },
                eig_range: (0.5, 5.0),
                majorizer: MajorizerMode::Tight,
                minorizer: MinorizerMode::Zero,
                seed: 32,
            }),
            "stress" => random(RandomPreset {
                x_dims: vec![2, 1, 2],
                y_dims: vec![1, 2],
                z_dim: 3,
                p1: ProxKind::L1 { weight: 0.3 },
                q1: ProxKind::Zero,
                eig_range: (0.2, 4.0),
                majorizer: MajorizerMode::Loose,
                minorizer: MinorizerMode::MinEig,
                seed: 49,
            }),
            "twobytwo" => random(RandomPreset {
                x_dims: vec![1, 2],
                y_dims: vec![2, 1],
                z_dim: 2,
                p1: ProxKind::Zero,
                q1: ProxKind::Zero,
                eig_range: (0.5, 8.0),
                majorizer: MajorizerMode::Tight,
                minorizer: MinorizerMode::MinEig,
                seed: 22,
            }),
            _ => Err(Error::InvalidParameter(format!(
                "unknown preset `{name}` (expected one of {})",
                PRESET_NAMES.join(", ")
            ))),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Self::Tiny => "tiny",
            Self::Lasso1 => "lasso1",
            Self::Box1 => "box1",
            Self::Random { name, .. } => name,
        }
    }

    pub fn generate(&self) -> Result<ProblemSpec> {
        match self {
            Self::Tiny => scalar_instance(1.0, 0.0, 1.0, ProxFriendlyFunction::zero(1)),
            Self::Lasso1 => scalar_instance(1.0, -2.0, 2.0, ProxFriendlyFunction::l1(1, 1.0)?),
            Self::Box1 => scalar_instance(
                1.0,
                -3.0,
                2.0,
                ProxFriendlyFunction::box_indicator(vec![0.0], vec![1.0])?,
            ),
            Self::Random { knobs, .. } => generate(knobs),
        }
    }
}

/// `min p1(x) + 1/2 q x² + l x + 1/2 y²  s.t.  x + y = c`.
fn scalar_instance(q: f64, l: f64, c: f64, p1: ProxFriendlyFunction) -> Result<ProblemSpec> {
    let s = BlockStructure::single(1)?;
    let f = SmoothConvexFunction::new(
        BlockOperator::from_diagonal(s.clone(), &[q])?,
        BlockVector::from_slice(s.clone(), &[l])?,
        l * l / (2.0 * q),
        MajorizerMode::Tight,
        MinorizerMode::Zero,
    )?;
    let g = SmoothConvexFunction::new(
        BlockOperator::identity(s.clone()),
        BlockVector::zeros(s.clone()),
        0.0,
        MajorizerMode::Tight,
        MinorizerMode::Zero,
    )?;
    ProblemSpec::new(
        s.clone(),
        s,
        1,
        p1,
        ProxFriendlyFunction::zero(1),
        f,
        g,
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, 1.0),
        DVector::from_element(1, c),
    )
}

/// Haar-ish random orthogonal matrix from the QR factor of a Gaussian matrix.
pub fn random_orthogonal(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `V diag(λ) Vᵀ` with `λ` log-uniform in `[lo, hi]`.
pub fn random_spd(n: usize, (lo, hi): (f64, f64), rng: &mut impl Rng) -> DMatrix<f64> {
    let v = random_orthogonal(n, rng);
    let (a, b) = (lo.ln(), hi.ln());
    let lam = DVector::from_fn(n, |_, _| (a + (b - a) * rng.random::<f64>()).exp());
    symmetrize(&(&v * DMatrix::from_diagonal(&lam) * v.transpose()))
}

/// Random PSD matrix of the given rank with eigenvalues in `[lo, hi]`.
pub fn random_psd(n: usize, rank: usize, range: (f64, f64), rng: &mut impl Rng) -> DMatrix<f64> {
    let v = random_orthogonal(n, rng);
    let (a, b) = (range.0.ln(), range.1.ln());
    let lam = DVector::from_fn(n, |i, _| {
        if i < rank {
            (a + (b - a) * rng.random::<f64>()).exp()
        } else {
            0.0
        }
    });
    symmetrize(&(&v * DMatrix::from_diagonal(&lam) * v.transpose()))
}

pub fn gaussian_vector(n: usize, rng: &mut impl Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

fn sample_in_domain(kind: ProxKind, n: usize, rng: &mut impl Rng) -> DVector<f64> {
    match kind {
        ProxKind::Box { lo, hi } => DVector::from_fn(n, |_, _| lo + (hi - lo) * rng.random_range(0.1..0.9)),
        _ => gaussian_vector(n, rng),
    }
}

pub fn generate(knobs: &RandomPreset) -> Result<ProblemSpec> {
    let xs = BlockStructure::new(knobs.x_dims.clone())?;
    let ys = BlockStructure::new(knobs.y_dims.clone())?;
    let (nx, ny, nz) = (xs.total_dim(), ys.total_dim(), knobs.z_dim);
    let (lo, hi) = knobs.eig_range;
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::InvalidParameter(format!("eigenvalue range ({lo}, {hi}) is not positive and ordered")));
    }
    let free = nx - xs.block_dim(0) + ny - ys.block_dim(0);
    if nz == 0 || nz > free {
        return Err(Error::InvalidParameter(format!(
            "z_dim must be in 1..={free} (number of smooth coordinates) so multipliers are unique"
        )));
    }
    let p1 = knobs.p1.build(xs.block_dim(0))?;
    let q1 = knobs.q1.build(ys.block_dim(0))?;

    let mut rng = ChaCha8Rng::seed_from_u64(knobs.seed);
    let qf = random_spd(nx, knobs.eig_range, &mut rng);
    let qg = random_spd(ny, knobs.eig_range, &mut rng);
    let lf = gaussian_vector(nx, &mut rng);
    let lg = gaussian_vector(ny, &mut rng);
    let a_adj = DMatrix::from_fn(nz, nx, |_, _| StandardNormal.sample(&mut rng));
    let b_adj = DMatrix::from_fn(nz, ny, |_, _| StandardNormal.sample(&mut rng));
    let x_star = sample_in_domain(knobs.p1, nx, &mut rng);
    let y_star = sample_in_domain(knobs.q1, ny, &mut rng);
    let c = &a_adj * &x_star + &b_adj * &y_star;

    let f = SmoothConvexFunction::new(
        BlockOperator::symmetric(xs.clone(), qf)?,
        BlockVector::new(xs.clone(), lf)?,
        0.0,
        knobs.majorizer,
        knobs.minorizer,
    )?;
    let g = SmoothConvexFunction::new(
        BlockOperator::symmetric(ys.clone(), qg)?,
        BlockVector::new(ys.clone(), lg)?,
        0.0,
        knobs.majorizer,
        knobs.minorizer,
    )?;
    ProblemSpec::new(xs, ys, nz, p1, q1, f, g, a_adj, b_adj, c)
}

/// Verified KKT point.
#[derive(Debug, Clone, PartialEq)]
pub struct KktPoint {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub z: DVector<f64>,
    /// Unscaled KKT residual at the point.
    pub residual: f64,
}

/// Largest number of nonsmooth coordinates the enumeration accepts.
pub const MAX_ENUMERATED: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
enum CoordState {
    /// Coordinate free, with a fixed subgradient contribution.
    Free(f64),
    /// Coordinate pinned at a value.
    Fixed(f64),
}

/// Per-coordinate pattern alternatives of a nonsmooth coordinate.
fn alternatives(func: &ProxFriendlyFunction, j: usize) -> Vec<CoordState> {
    match func {
        ProxFriendlyFunction::Zero { .. } => vec![CoordState::Free(0.0)],
        ProxFriendlyFunction::L1 { weight, .. } => {
            if *weight == 0.0 {
                vec![CoordState::Free(0.0)]
            } else {
                vec![CoordState::Free(-weight), CoordState::Fixed(0.0), CoordState::Free(*weight)]
            }
        }
        ProxFriendlyFunction::BoxIndicator { lo, hi } => {
            if lo[j] == hi[j] {
                vec![CoordState::Fixed(lo[j])]
            } else {
                vec![CoordState::Fixed(lo[j]), CoordState::Free(0.0), CoordState::Fixed(hi[j])]
            }
        }
    }
}

/// Solves the KKT system by enumerating active patterns of the block-1
/// coordinates; returns the first (in pattern order) candidate whose
/// unscaled KKT residual is at most `tol`.
pub fn oracle_solve(spec: &ProblemSpec, tol: f64) -> Result<KktPoint> {
    oracle_solve_with(spec, tol, Execution::default())
}

pub fn oracle_solve_with(spec: &ProblemSpec, tol: f64, exec: Execution) -> Result<KktPoint> {
    let (nx, ny, nz) = (spec.x_dim(), spec.y_dim(), spec.z_dim());
    let d1x = spec.x_structure().block_dim(0);
    let d1y = spec.y_structure().block_dim(0);
    let n = nx + ny;

    // per-coordinate alternatives over the stacked u = (x, y)
    let mut alts: Vec<Vec<CoordState>> = vec![vec![CoordState::Free(0.0)]; n];
    for (j, alt) in alts.iter_mut().take(d1x).enumerate() {
        *alt = alternatives(spec.p1(), j);
    }
    for j in 0..d1y {
        alts[nx + j] = alternatives(spec.q1(), j);
    }
    let branching = alts.iter().filter(|a| a.len() > 1).count();
    if branching > MAX_ENUMERATED {
        return Err(Error::Unsupported(format!(
            "oracle enumeration over {branching} nonsmooth coordinates (limit {MAX_ENUMERATED})"
        )));
    }
    let total: usize = alts.iter().map(|a| a.len()).product();

    let mut q = DMatrix::zeros(n, n);
    q.view_mut((0, 0), (nx, nx)).copy_from(spec.f().quad().matrix());
    q.view_mut((nx, nx), (ny, ny)).copy_from(spec.g().quad().matrix());
    let mut l = DVector::zeros(n);
    l.rows_mut(0, nx).copy_from(spec.f().linear().data());
    l.rows_mut(nx, ny).copy_from(spec.g().linear().data());
    let mut a = DMatrix::zeros(nz, n);
    a.view_mut((0, 0), (nz, nx)).copy_from(spec.a_adj());
    a.view_mut((0, nx), (nz, ny)).copy_from(spec.b_adj());

    let candidate = |idx: usize| -> Option<KktPoint> {
        let mut rem = idx;
        let pattern: Vec<CoordState> = alts
            .iter()
            .map(|alt| {
                let s = alt[rem % alt.len()];
                rem /= alt.len();
                s
            })
            .collect();
        let free: Vec<usize> = (0..n).filter(|&j| matches!(pattern[j], CoordState::Free(_))).collect();
        let mut u = DVector::zeros(n);
        for (j, s) in pattern.iter().enumerate() {
            if let CoordState::Fixed(v) = s {
                u[j] = *v;
            }
        }
        let nf = free.len();
        let mut kkt = DMatrix::zeros(nf + nz, nf + nz);
        let mut rhs = DVector::zeros(nf + nz);
        let qu_fixed = &q * &u;
        let au_fixed = &a * &u;
        for (r, &i) in free.iter().enumerate() {
            for (c, &j) in free.iter().enumerate() {
                kkt[(r, c)] = q[(i, j)];
            }
            for k in 0..nz {
                kkt[(r, nf + k)] = a[(k, i)];
                kkt[(nf + k, r)] = a[(k, i)];
            }
            let sub = match pattern[i] {
                CoordState::Free(s) => s,
                CoordState::Fixed(_) => 0.0,
            };
            rhs[r] = -l[i] - sub - qu_fixed[i];
        }
        for k in 0..nz {
            rhs[nf + k] = spec.c()[k] - au_fixed[k];
        }
        let sol = kkt.clone().lu().solve(&rhs).or_else(|| {
            kkt.svd(true, true).solve(&rhs, 1e-13).ok()
        })?;
        for (r, &i) in free.iter().enumerate() {
            u[i] = sol[r];
        }
        let z = sol.rows(nf, nz).into_owned();
        let x = u.rows(0, nx).into_owned();
        let y = u.rows(nx, ny).into_owned();
        if !spec.p_value(&x).is_finite() || !spec.q_value(&y).is_finite() {
            return None;
        }
        let residual = spec.kkt_residual_abs(&x, &y, &z);
        (residual <= tol).then_some(KktPoint { x, y, z, residual })
    };

    map_range(exec, total, candidate)
        .into_iter()
        .flatten()
        .next()
        .ok_or_else(|| Error::Subproblem(format!("oracle found no pattern with KKT residual <= {tol:e}")))
}

/// `argmin θ(u_1) + 1/2 <u, P u> - <q, u>` by pattern enumeration, where `θ`
/// acts on the leading `theta.dim()` coordinates and `P` is positive
/// definite. Each pattern fixes or frees every nonsmooth coordinate and is
/// resolved by one linear solve; the unique minimizer is the candidate whose
/// subgradient certificate vanishes.
pub fn oracle_prox_quadratic(
    theta: &ProxFriendlyFunction,
    p: &DMatrix<f64>,
    q: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = q.len();
    let m = theta.dim();
    if p.nrows() != n || p.ncols() != n || m > n {
        return Err(Error::DimensionMismatch(format!(
            "prox oracle with P {}x{}, q {n}, θ on {m}",
            p.nrows(),
            p.ncols()
        )));
    }
    let alts: Vec<Vec<CoordState>> = (0..m).map(|j| alternatives(theta, j)).collect();
    let branching = alts.iter().filter(|a| a.len() > 1).count();
    if branching > MAX_ENUMERATED {
        return Err(Error::Unsupported(format!("prox oracle over {branching} coordinates")));
    }
    let total: usize = alts.iter().map(|a| a.len()).product();
    let scale = 1.0 + p.amax() + q.amax();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for idx in 0..total {
        let mut rem = idx;
        let mut u = DVector::zeros(n);
        let mut sub = DVector::zeros(n);
        let mut free: Vec<usize> = Vec::with_capacity(n);
        for (j, alt) in alts.iter().enumerate() {
            match alt[rem % alt.len()] {
                CoordState::Free(s) => {
                    free.push(j);
                    sub[j] = s;
                }
                CoordState::Fixed(v) => u[j] = v,
            }
            rem /= alt.len();
        }
        free.extend(m..n);
        let nf = free.len();
        let pu = p * &u;
        let pff = DMatrix::from_fn(nf, nf, |a, b| p[(free[a], free[b])]);
        let rhs = DVector::from_fn(nf, |a, _| q[free[a]] - sub[free[a]] - pu[free[a]]);
        if nf > 0 {
            let Some(sol) = pff.lu().solve(&rhs) else { continue };
            for (a, &i) in free.iter().enumerate() {
                u[i] = sol[a];
            }
        }
        let g = q - p * &u;
        let u1 = u.rows(0, m).into_owned();
        let viol = theta
            .subgradient_violation(&u1, &g.rows(0, m).into_owned())
            .max(if m < n { g.rows(m, n - m).amax() } else { 0.0 });
        if best.as_ref().is_none_or(|(b, _)| viol < *b) {
            best = Some((viol, u));
        }
    }
    match best {
        Some((v, u)) if v <= 1e-9 * scale => Ok(u),
        Some((v, _)) => Err(Error::Subproblem(format!("prox oracle: best certificate violation {v:e}"))),
        None => Err(Error::Subproblem("prox oracle: every pattern was singular".into())),
    }
}
