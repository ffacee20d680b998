#![allow(dead_code)]

use dppl_core::dpp::DppKernel;
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// `A A^T / r` with `A` an `n x r` Gaussian matrix; rank-deficient when `r < n`.
pub fn random_psd(n: usize, rank: usize, scale: f64, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    let a = gaussian_matrix(n, rank, &mut r);
    let l = &a * a.transpose() * (scale / rank as f64);
    (&l + l.transpose()) * 0.5
}

pub fn random_kernel(n: usize, rank: usize, scale: f64, seed: u64) -> DppKernel {
    DppKernel::new(random_psd(n, rank, scale, seed)).unwrap()
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| m[(i, j)]).collect()).collect();
    let mut d = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
        if a[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            a.swap(p, c);
            d = -d;
        }
        d *= a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    d
}

pub fn minor(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

pub fn subsets(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..1usize << n).map(move |mask| (0..n).filter(|i| mask >> i & 1 == 1).collect())
}

/// Exact L-ensemble probabilities indexed by bitmask, from raw determinants.
pub fn brute_force_distribution(l: &DMatrix<f64>) -> Vec<f64> {
    let n = l.nrows();
    let z = det(&(l + DMatrix::identity(n, n)));
    subsets(n).map(|s| if s.is_empty() { 1.0 / z } else { det(&minor(l, &s)) / z }).collect()
}

pub fn mask(s: &[usize]) -> usize {
    s.iter().fold(0, |m, &i| m | 1 << i)
}

pub fn total_variation(p: &[f64], counts: &[u64], draws: u64) -> f64 {
    0.5 * p.iter().zip(counts).map(|(p, &c)| (p - c as f64 / draws as f64).abs()).sum::<f64>()
}
