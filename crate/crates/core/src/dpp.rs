//! Finite determinantal point processes in the L-ensemble form.
//!
//! A [`DppKernel`] owns a symmetric PSD matrix `L` together with its
//! eigendecomposition, computed once at construction. Subsets are represented
//! as sorted `Vec<usize>` of item indices.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};

const SYMMETRY_TOL: f64 = 1e-9;
/// Relative size below which negative eigenvalues are treated as round-off.
const PSD_FLOOR_RTOL: f64 = 1e-8;
const ORTHONORMAL_TOL: f64 = 1e-9;
const RESIDUAL_NORM_TOL: f64 = 1e-12;

/// Largest ground set accepted by [`enumerate_distribution`].
pub const MAX_ENUMERATION_SIZE: usize = 12;

#[derive(Debug, Clone)]
pub struct DppKernel {
    l: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
    floored: usize,
}

impl DppKernel {
    /// Builds a kernel from a symmetric matrix. Eigenvalues in
    /// `(-1e-8 * lambda_max, 0)` are clamped to zero and `L` is rebuilt from
    /// the clamped spectrum; anything more negative is rejected.
    pub fn new(l: DMatrix<f64>) -> Result<Self> {
        let n = l.nrows();
        if l.ncols() != n {
            return Err(Error::InvalidParameter(format!(
                "kernel must be square, got {}x{}",
                n,
                l.ncols()
            )));
        }
        if l.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("kernel has non-finite entries".into()));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (l[(i, j)], l[(j, i)]);
                if (a - b).abs() > SYMMETRY_TOL * a.abs().max(1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "kernel is not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        let (mut eigenvalues, eigenvectors) = symmetric_eigen(&l);
        let largest = eigenvalues.iter().fold(0.0_f64, |m, &x| m.max(x));
        let mut floored = 0;
        for lam in eigenvalues.iter_mut() {
            if *lam < 0.0 {
                if *lam < -PSD_FLOOR_RTOL * largest {
                    return Err(Error::PsdViolation {
                        eigenvalue: *lam,
                        largest,
                    });
                }
                *lam = 0.0;
                floored += 1;
            }
        }
        let l = if floored > 0 {
            let mut rebuilt = &eigenvectors * DMatrix::from_diagonal(&eigenvalues) * eigenvectors.transpose();
            symmetrize(&mut rebuilt);
            rebuilt
        } else {
            l
        };
        Ok(Self {
            l,
            eigenvalues,
            eigenvectors,
            floored,
        })
    }

    pub fn len(&self) -> usize {
        self.l.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.l.nrows() == 0
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// Eigenvalues in ascending order, all non-negative.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors as columns, matching [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// Number of eigenvalues clamped to zero at construction.
    pub fn floored_count(&self) -> usize {
        self.floored
    }

    /// log det(L + I).
    pub fn log_normalizer(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.ln_1p()).sum()
    }

    /// log det(L_Y); `-inf` when the principal minor is singular.
    pub fn log_det_subset(&self, subset: &[usize]) -> f64 {
        log_det_psd(&principal_submatrix(&self.l, subset))
    }

    pub fn marginal_kernel(&self) -> DMatrix<f64> {
        marginal_kernel(self)
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
pub fn symmetric_eigen(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.nrows();
    if n == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let eig = a.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

pub fn principal_submatrix(m: &DMatrix<f64>, subset: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(subset.len(), subset.len(), |r, c| m[(subset[r], subset[c])])
}

/// Determinant of a principal minor; the empty minor is 1.
pub fn minor_det(m: &DMatrix<f64>, subset: &[usize]) -> f64 {
    if subset.is_empty() {
        1.0
    } else {
        principal_submatrix(m, subset).determinant()
    }
}

/// log det of a PSD matrix via Cholesky; `-inf` when not positive definite.
pub fn log_det_psd(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    match m.clone().cholesky() {
        Some(ch) => 2.0 * ch.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>(),
        None => f64::NEG_INFINITY,
    }
}

/// K = sum_n lambda_n / (1 + lambda_n) v_n v_n^T.
pub fn marginal_kernel(kernel: &DppKernel) -> DMatrix<f64> {
    let scaled = kernel.eigenvalues.map(|l| l / (1.0 + l));
    let v = &kernel.eigenvectors;
    let mut k = v * DMatrix::from_diagonal(&scaled) * v.transpose();
    symmetrize(&mut k);
    k
}

/// K = (L + I)^{-1} L, computed by an LU solve instead of the spectrum.
pub fn marginal_kernel_by_inverse(kernel: &DppKernel) -> DMatrix<f64> {
    let n = kernel.len();
    let shifted = &kernel.l + DMatrix::identity(n, n);
    shifted
        .lu()
        .solve(&kernel.l)
        .expect("L + I is positive definite")
}

/// P(Y = subset) = det(L_Y) / det(L + I).
pub fn subset_probability(kernel: &DppKernel, subset: &[usize]) -> f64 {
    let det = minor_det(&kernel.l, subset).max(0.0);
    det * (-kernel.log_normalizer()).exp()
}

/// P(subset ⊆ Y) = det(K_A).
pub fn marginal_probability(k: &DMatrix<f64>, subset: &[usize]) -> f64 {
    minor_det(k, subset)
}

/// Orthonormal vectors spanning the marginal kernel of an elementary DPP.
#[derive(Debug, Clone)]
pub struct ElementaryDpp {
    /// N×k, one orthonormal vector per column.
    basis: DMatrix<f64>,
}

impl ElementaryDpp {
    pub fn new(vectors: &[DVector<f64>]) -> Result<Self> {
        let n = vectors.first().map_or(0, |v| v.len());
        if vectors.iter().any(|v| v.len() != n) {
            return Err(Error::InvalidParameter("vectors have different lengths".into()));
        }
        let basis = DMatrix::from_columns(vectors);
        Self::from_columns(basis)
    }

    pub fn from_columns(basis: DMatrix<f64>) -> Result<Self> {
        let gram = basis.transpose() * &basis;
        let k = gram.nrows();
        for i in 0..k {
            for j in 0..k {
                let target = if i == j { 1.0 } else { 0.0 };
                if (gram[(i, j)] - target).abs() > ORTHONORMAL_TOL {
                    return Err(Error::InvalidParameter(format!(
                        "vectors are not orthonormal: <v{i}, v{j}> = {}",
                        gram[(i, j)]
                    )));
                }
            }
        }
        Ok(Self { basis })
    }

    pub fn ground_size(&self) -> usize {
        self.basis.nrows()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// K^V = sum_{v in V} v v^T.
    pub fn marginal_kernel(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }
}

/// Draws exactly `rank` items: pick item `i` with probability proportional to
/// the squared norm of its row `b_i`, then project every row onto the
/// orthogonal complement of `b_i`.
pub fn sample_elementary(e: &ElementaryDpp, seed: u64) -> Result<Vec<usize>> {
    sample_elementary_with(e.basis.clone(), &mut rng_from_seed(seed))
}

fn sample_elementary_with(mut rows: DMatrix<f64>, rng: &mut Rng) -> Result<Vec<usize>> {
    let (n, k) = rows.shape();
    let mut weights: Vec<f64> = (0..n).map(|i| rows.row(i).norm_squared()).collect();
    let mut picked = Vec::with_capacity(k);
    for step in 0..k {
        let total: f64 = weights.iter().sum();
        if total < RESIDUAL_NORM_TOL {
            return Err(Error::NumericalDegeneracy(format!(
                "residual norms vanished after {step} of {k} selections"
            )));
        }
        let mut u = rng.random::<f64>() * total;
        let mut chosen = None;
        for (i, &w) in weights.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            chosen = Some(i);
            if u < w {
                break;
            }
            u -= w;
        }
        let i = chosen.expect("positive total weight");
        picked.push(i);

        let mut dir = rows.row(i).transpose();
        dir /= dir.norm();
        // Two passes of Gram-Schmidt keep the rows orthogonal to `dir`
        // to working precision.
        for _ in 0..2 {
            let coeff = &rows * &dir;
            rows -= &coeff * dir.transpose();
        }
        for j in 0..n {
            let w = rows.row(j).norm_squared();
            weights[j] = if w < RESIDUAL_NORM_TOL { 0.0 } else { w };
        }
        weights[i] = 0.0;
    }
    picked.sort_unstable();
    Ok(picked)
}

/// Spectral sampler: keep eigenvector `n` with probability
/// `lambda_n / (1 + lambda_n)`, then sample the elementary DPP they span.
pub fn sample_dpp(kernel: &DppKernel, seed: u64) -> Vec<usize> {
    sample_dpp_with(kernel, &mut rng_from_seed(seed))
}

pub fn sample_dpp_with(kernel: &DppKernel, rng: &mut Rng) -> Vec<usize> {
    let selected: Vec<usize> = kernel
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &lam)| rng.random::<f64>() < lam / (1.0 + lam))
        .map(|(n, _)| n)
        .collect();
    if selected.is_empty() {
        return Vec::new();
    }
    let basis = kernel.eigenvectors.select_columns(&selected);
    // Eigenvectors of a symmetric matrix are orthonormal, so the residual
    // weights never vanish early.
    sample_elementary_with(basis, rng).expect("orthonormal eigenbasis")
}

/// Greedy log-determinant maximization. Starting from the empty set, adds the
/// item with the largest ratio det(L_{Y+i}) / det(L_Y) while that ratio
/// exceeds 1. Ties go to the lowest index.
///
/// The ratios are the squared pivots of an incremental Cholesky
/// factorization of `L_Y`, updated in O(N |Y|) per step.
pub fn greedy_map(kernel: &DppKernel) -> Vec<usize> {
    let l = &kernel.l;
    let n = l.nrows();
    let mut gains: Vec<f64> = (0..n).map(|i| l[(i, i)]).collect();
    let mut factors: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut in_set = vec![false; n];
    let mut chosen = Vec::new();
    loop {
        let mut best: Option<usize> = None;
        for i in 0..n {
            if in_set[i] {
                continue;
            }
            if best.is_none_or(|b| gains[i] > gains[b]) {
                best = Some(i);
            }
        }
        let Some(j) = best else { break };
        if gains[j] <= 1.0 {
            break;
        }
        in_set[j] = true;
        chosen.push(j);
        let pivot = gains[j].sqrt();
        let cj = factors[j].clone();
        for i in 0..n {
            if in_set[i] {
                continue;
            }
            let dot: f64 = cj.iter().zip(&factors[i]).map(|(a, b)| a * b).sum();
            let e = (l[(j, i)] - dot) / pivot;
            factors[i].push(e);
            gains[i] -= e * e;
        }
    }
    chosen.sort_unstable();
    chosen
}

/// Greedy MAP for `L = D S D` with `D = diag(exp(log_scale))`, without
/// forming `L`. The ratio for item `i` is `exp(2 log_scale_i)` times the Schur
/// complement of `S`, so qualities whose squares overflow are still ranked
/// exactly. Same stopping rule and tie-breaking as [`greedy_map`]; items with a
/// non-positive Schur complement are never added.
pub fn greedy_map_scaled(log_scale: &[f64], s: &DMatrix<f64>) -> Result<Vec<usize>> {
    let n = log_scale.len();
    if s.nrows() != n || s.ncols() != n {
        return Err(Error::InvalidParameter(format!(
            "similarity is {}x{} but there are {n} scales",
            s.nrows(),
            s.ncols()
        )));
    }
    if log_scale.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("log scales must be finite".into()));
    }
    let log_gain = |schur: f64, i: usize| {
        if schur > 0.0 {
            2.0 * log_scale[i] + schur.ln()
        } else {
            f64::NEG_INFINITY
        }
    };
    let mut schur: Vec<f64> = (0..n).map(|i| s[(i, i)]).collect();
    let mut factors: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut in_set = vec![false; n];
    let mut chosen = Vec::new();
    loop {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..n {
            if in_set[i] {
                continue;
            }
            let g = log_gain(schur[i], i);
            if best.is_none_or(|(_, b)| g > b) {
                best = Some((i, g));
            }
        }
        let Some((j, g)) = best else { break };
        if g <= 0.0 {
            break;
        }
        in_set[j] = true;
        chosen.push(j);
        let pivot = schur[j].sqrt();
        let cj = factors[j].clone();
        for i in 0..n {
            if in_set[i] {
                continue;
            }
            let dot: f64 = cj.iter().zip(&factors[i]).map(|(a, b)| a * b).sum();
            let e = (s[(j, i)] - dot) / pivot;
            factors[i].push(e);
            schur[i] -= e * e;
        }
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// Exact distribution over all subsets, indexed by bitmask (bit `i` = item `i`).
#[derive(Debug, Clone)]
pub struct SubsetDistribution {
    n: usize,
    probs: Vec<f64>,
}

impl SubsetDistribution {
    pub fn ground_size(&self) -> usize {
        self.n
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn probability(&self, subset: &[usize]) -> f64 {
        self.probs[subset_mask(subset)]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(|(mask, &p)| (mask_subset(mask, self.n), p))
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }
}

pub fn subset_mask(subset: &[usize]) -> usize {
    subset.iter().fold(0, |m, &i| m | (1 << i))
}

pub fn mask_subset(mask: usize, n: usize) -> Vec<usize> {
    (0..n).filter(|&i| mask >> i & 1 == 1).collect()
}

pub fn enumerate_distribution(kernel: &DppKernel) -> Result<SubsetDistribution> {
    let n = kernel.len();
    if n > MAX_ENUMERATION_SIZE {
        return Err(Error::InstanceTooLarge {
            size: n,
            limit: MAX_ENUMERATION_SIZE,
        });
    }
    let probs = (0..1usize << n)
        .map(|mask| subset_probability(kernel, &mask_subset(mask, n)))
        .collect();
    Ok(SubsetDistribution { n, probs })
}
