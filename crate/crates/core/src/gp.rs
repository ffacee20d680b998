//! Log-domain barrier solver for the trust-region power-control geometric
//! program solved at each outer iteration of the sum-rate heuristic.
//!
//! With `x_l = ln p_l` and `y_l = ln gamma_l` the subproblem reads
//!
//! ```text
//! minimize    -sum_l a_l y_l                       a_l = g_l / (1 + g_l)
//! subject to  |y_l - ln g_l| <= ln beta
//!             y_l - x_l - ln zeta_ll + ln(1 + sum_{j != l} zeta_jl e^{x_j}) <= 0
//!             ln p_floor <= x_l <= ln p_max
//! ```
//!
//! where `g_l` is the current SINR guess. Every constraint is convex in
//! `(x, y)`, and the problem is solved with a damped Newton barrier method.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::net::{sinr_all, LinkNetwork};

/// Barrier parameter growth per centering step.
const BARRIER_GROWTH: f64 = 20.0;
const MAX_NEWTON_STEPS: usize = 200;
const NEWTON_DECREMENT_TOL: f64 = 1e-10;
const LINE_SEARCH_ALPHA: f64 = 0.01;
const LINE_SEARCH_BETA: f64 = 0.5;

/// Outcome of one subproblem solve.
#[derive(Debug, Clone)]
pub struct GpSolution {
    /// Optimal (log-domain) SINR variables, exponentiated.
    pub gamma: Vec<f64>,
    pub powers: Vec<f64>,
    /// Largest violation of any constraint at the returned point.
    pub max_residual: f64,
    pub newton_steps: usize,
    /// Surrogate objective `-sum a_l ln gamma_l` at the solution.
    pub objective: f64,
}

pub(crate) struct Subproblem<'a> {
    net: &'a LinkNetwork,
    m: usize,
    weights: Vec<f64>,
    y_lo: Vec<f64>,
    y_hi: Vec<f64>,
    x_lo: f64,
    x_hi: f64,
    log_beta: f64,
    log_direct: Vec<f64>,
}

impl<'a> Subproblem<'a> {
    pub(crate) fn new(net: &'a LinkNetwork, sinr_guess: &[f64], beta: f64, p_floor: f64, p_max: f64) -> Self {
        let m = net.len();
        let log_beta = beta.ln();
        Self {
            net,
            m,
            weights: sinr_guess.iter().map(|g| g / (1.0 + g)).collect(),
            y_lo: sinr_guess.iter().map(|g| g.ln() - log_beta).collect(),
            y_hi: sinr_guess.iter().map(|g| g.ln() + log_beta).collect(),
            x_lo: p_floor.ln(),
            x_hi: p_max.ln(),
            log_beta,
            log_direct: (0..m).map(|l| net.gain(l, l).ln()).collect(),
        }
    }

    fn objective(&self, z: &DVector<f64>) -> f64 {
        -(0..self.m).map(|l| self.weights[l] * z[self.m + l]).sum::<f64>()
    }

    /// ln(1 + interference at Rx l) and the normalized interference shares.
    fn interference(&self, x: &[f64], l: usize) -> (f64, Vec<f64>) {
        let g = self.net.gains();
        let terms: Vec<f64> = (0..self.m)
            .map(|j| if j == l { 0.0 } else { g[(j, l)] * x[j].exp() })
            .collect();
        let total = 1.0 + terms.iter().sum::<f64>();
        (total.ln(), terms.into_iter().map(|t| t / total).collect())
    }

    /// Values of the SINR constraints.
    fn sinr_constraints(&self, z: &DVector<f64>) -> Vec<f64> {
        let x: Vec<f64> = z.rows(0, self.m).iter().copied().collect();
        (0..self.m)
            .map(|l| {
                let (log_i, _) = self.interference(&x, l);
                z[self.m + l] - x[l] - self.log_direct[l] + log_i
            })
            .collect()
    }

    /// Slacks of all linear constraints followed by the SINR constraints;
    /// `None` if any is non-positive.
    fn slacks(&self, z: &DVector<f64>) -> Option<Vec<f64>> {
        let m = self.m;
        let mut s = Vec::with_capacity(5 * m);
        for l in 0..m {
            s.push(z[l] - self.x_lo);
            s.push(self.x_hi - z[l]);
            s.push(z[m + l] - self.y_lo[l]);
            s.push(self.y_hi[l] - z[m + l]);
        }
        s.extend(self.sinr_constraints(z).into_iter().map(|h| -h));
        if s.iter().all(|&v| v > 0.0 && v.is_finite()) {
            Some(s)
        } else {
            None
        }
    }

    fn barrier_value(&self, z: &DVector<f64>, t: f64) -> Option<f64> {
        let s = self.slacks(z)?;
        Some(t * self.objective(z) - s.iter().map(|v| v.ln()).sum::<f64>())
    }

    fn num_constraints(&self) -> usize {
        5 * self.m
    }

    /// Gradient and Hessian of the barrier function.
    fn derivatives(&self, z: &DVector<f64>, t: f64) -> (DVector<f64>, DMatrix<f64>) {
        let m = self.m;
        let n = 2 * m;
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        for l in 0..m {
            grad[m + l] -= t * self.weights[l];

            let sx_lo = z[l] - self.x_lo;
            let sx_hi = self.x_hi - z[l];
            grad[l] += -1.0 / sx_lo + 1.0 / sx_hi;
            hess[(l, l)] += 1.0 / (sx_lo * sx_lo) + 1.0 / (sx_hi * sx_hi);

            let sy_lo = z[m + l] - self.y_lo[l];
            let sy_hi = self.y_hi[l] - z[m + l];
            grad[m + l] += -1.0 / sy_lo + 1.0 / sy_hi;
            hess[(m + l, m + l)] += 1.0 / (sy_lo * sy_lo) + 1.0 / (sy_hi * sy_hi);
        }
        let x: Vec<f64> = z.rows(0, m).iter().copied().collect();
        for l in 0..m {
            let (log_i, shares) = self.interference(&x, l);
            let h = z[m + l] - x[l] - self.log_direct[l] + log_i;
            let inv = -1.0 / h;
            // Sparse gradient of h_l: d/dx_j = shares_j (j != l), d/dx_l = -1, d/dy_l = 1.
            let mut idx: Vec<usize> = Vec::with_capacity(m + 1);
            let mut val: Vec<f64> = Vec::with_capacity(m + 1);
            for j in 0..m {
                idx.push(j);
                val.push(if j == l { -1.0 } else { shares[j] });
            }
            idx.push(m + l);
            val.push(1.0);
            for (a, &ia) in idx.iter().enumerate() {
                grad[ia] += inv * val[a];
                for (b, &ib) in idx.iter().enumerate() {
                    hess[(ia, ib)] += inv * inv * val[a] * val[b];
                }
            }
            // Curvature of the log-sum-exp part: diag(w) - w w^T over x_j, j != l.
            for j in 0..m {
                if j == l {
                    continue;
                }
                hess[(j, j)] += inv * shares[j];
                for k in 0..m {
                    if k != l {
                        hess[(j, k)] -= inv * shares[j] * shares[k];
                    }
                }
            }
        }
        (grad, hess)
    }

    /// Strictly feasible point near the given powers.
    fn initial_point(&self, powers: &[f64]) -> Result<DVector<f64>> {
        let m = self.m;
        let backoff = 0.25 * self.log_beta;
        let margin = 0.05 * self.log_beta;
        let x: Vec<f64> = powers
            .iter()
            .map(|p| p.ln().clamp(self.x_lo + margin, self.x_hi - margin))
            .collect();
        let p: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let achievable = sinr_all(self.net, &p);
        let mut z = DVector::zeros(2 * m);
        for l in 0..m {
            z[l] = x[l];
            let y = achievable[l].ln().min(self.y_hi[l]) - backoff;
            if !(y > self.y_lo[l] && y.is_finite()) {
                return Err(Error::InfeasibleSubproblem(format!(
                    "link {l}: achievable SINR {:.4e} is below the trust region",
                    achievable[l]
                )));
            }
            z[m + l] = y;
        }
        Ok(z)
    }
}

/// Solves the subproblem from the powers of the previous iterate.
pub(crate) fn solve(problem: &Subproblem<'_>, start_powers: &[f64], gap_tolerance: f64) -> Result<GpSolution> {
    let mut z = problem.initial_point(start_powers)?;
    let n_cons = problem.num_constraints() as f64;
    let mut t = 1.0;
    let mut newton_steps = 0;
    loop {
        // Centering.
        let mut converged = false;
        for _ in 0..MAX_NEWTON_STEPS {
            let (grad, hess) = problem.derivatives(&z, t);
            let step = newton_direction(hess, &grad)?;
            let decrement = -grad.dot(&step);
            if decrement / 2.0 <= NEWTON_DECREMENT_TOL {
                converged = true;
                break;
            }
            let f0 = problem
                .barrier_value(&z, t)
                .expect("iterate stays strictly feasible");
            let mut s = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let cand = &z + &step * s;
                if let Some(f) = problem.barrier_value(&cand, t) {
                    if f <= f0 - LINE_SEARCH_ALPHA * s * decrement && f < f0 {
                        z = cand;
                        accepted = true;
                        break;
                    }
                }
                s *= LINE_SEARCH_BETA;
            }
            newton_steps += 1;
            if !accepted {
                // No progress is possible at working precision.
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NonConvergence {
                iterations: newton_steps,
            });
        }
        if n_cons / t <= gap_tolerance {
            break;
        }
        t *= BARRIER_GROWTH;
    }
    let m = problem.m;
    let residual = problem
        .sinr_constraints(&z)
        .into_iter()
        .fold(0.0_f64, |acc, h| acc.max(h));
    Ok(GpSolution {
        gamma: (0..m).map(|l| z[m + l].exp()).collect(),
        powers: (0..m).map(|l| z[l].exp()).collect(),
        max_residual: residual.max(0.0),
        newton_steps,
        objective: problem.objective(&z),
    })
}

fn newton_direction(mut hess: DMatrix<f64>, grad: &DVector<f64>) -> Result<DVector<f64>> {
    let n = hess.nrows();
    let scale = hess.diagonal().amax().max(1.0);
    let mut shift = 0.0;
    for _ in 0..8 {
        if let Some(ch) = hess.clone().cholesky() {
            return Ok(-ch.solve(grad));
        }
        shift = if shift == 0.0 { 1e-12 * scale } else { shift * 100.0 };
        for i in 0..n {
            hess[(i, i)] += shift;
        }
    }
    Err(Error::NumericalDegeneracy("barrier Hessian is not positive definite".into()))
}
