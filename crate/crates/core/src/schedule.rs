//! Link schedulers: the successive geometric-programming heuristic, an
//! exhaustive oracle for small networks, and independent thinning.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{self, Subproblem};
use crate::learn::TrainingSet;
use crate::net::{sinr_all, sum_rate, sum_rate_with_powers, ActiveSubset, LinkNetwork, PowerConfig};
use crate::rng::rng_from_seed;

/// Largest network accepted by [`exhaustive_schedule`].
pub const MAX_EXHAUSTIVE_LINKS: usize = 20;

/// Relaxed powers live in `[P_FLOOR_RATIO * p_max, p_max]`.
pub const P_FLOOR_RATIO: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpSettings {
    /// Trust-region factor, > 1.
    pub beta: f64,
    /// Outer-loop tolerance on the largest SINR change.
    pub epsilon: f64,
    pub max_outer_iters: usize,
    /// Duality-gap target of the inner barrier solve.
    pub inner_tolerance: f64,
}

impl Default for GpSettings {
    fn default() -> Self {
        Self {
            beta: 1.1,
            epsilon: 0.01,
            max_outer_iters: 100,
            inner_tolerance: 1e-6,
        }
    }
}

impl GpSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 1.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must exceed 1, got {}", self.beta)));
        }
        if !(self.epsilon > 0.0) || !(self.inner_tolerance > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::InvalidParameter("need at least one outer iteration".into()));
        }
        Ok(())
    }
}

/// Relaxed power allocation and the SINR guess it induces.
#[derive(Debug, Clone, PartialEq)]
pub struct GpIterate {
    pub powers: Vec<f64>,
    pub sinr_guess: Vec<f64>,
}

impl GpIterate {
    pub fn new(powers: Vec<f64>, sinr_guess: Vec<f64>) -> Result<Self> {
        if powers.len() != sinr_guess.len() {
            return Err(Error::InvalidParameter("powers and SINR guess differ in length".into()));
        }
        let ok = |v: &[f64]| v.iter().all(|x| *x > 0.0 && x.is_finite());
        if !ok(&powers) || !ok(&sinr_guess) {
            return Err(Error::InvalidParameter("iterate entries must be positive and finite".into()));
        }
        Ok(Self { powers, sinr_guess })
    }

    /// Uniform powers with their exact SINRs as the guess.
    pub fn uniform(network: &LinkNetwork, power: f64) -> Result<Self> {
        let powers = vec![power; network.len()];
        let sinr_guess = sinr_all(network, &powers);
        Self::new(powers, sinr_guess)
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }
}

/// Coefficients `(k, a)` of the monomial `k * g^a` that touches `1 + g` at
/// `g = gamma_hat` and lies below it everywhere else.
pub fn monomial_params(gamma_hat: f64) -> Result<(f64, f64)> {
    if !(gamma_hat > 0.0 && gamma_hat.is_finite()) {
        return Err(Error::InvalidParameter(format!("SINR guess must be positive, got {gamma_hat}")));
    }
    let a = gamma_hat / (1.0 + gamma_hat);
    let k = gamma_hat.powf(-a) * (1.0 + gamma_hat);
    Ok((k, a))
}

/// One trust-region GP step. The returned SINRs are the exact SINRs at the
/// optimal powers, capped at the trust-region ceiling `beta * gamma_hat`.
pub fn solve_gp_subproblem(
    network: &LinkNetwork,
    iterate: &GpIterate,
    settings: &GpSettings,
    p_max: f64,
) -> Result<(GpIterate, gp::GpSolution)> {
    settings.validate()?;
    if iterate.len() != network.len() {
        return Err(Error::InvalidParameter("iterate does not match the network".into()));
    }
    let p_floor = P_FLOOR_RATIO * p_max;
    let problem = Subproblem::new(network, &iterate.sinr_guess, settings.beta, p_floor, p_max);
    let solution = gp::solve(&problem, &iterate.powers, settings.inner_tolerance)?;
    let exact = sinr_all(network, &solution.powers);
    let gamma: Vec<f64> = exact
        .iter()
        .zip(&iterate.sinr_guess)
        .map(|(g, hat)| g.min(settings.beta * hat))
        .collect();
    let next = GpIterate::new(solution.powers.clone(), gamma)?;
    Ok((next, solution))
}

/// Link `l` is active iff `p_l >= p_threshold`.
pub fn quantize_powers(powers: &[f64], cfg: &PowerConfig) -> ActiveSubset {
    ActiveSubset::from_mask(&powers.iter().map(|&p| p >= cfg.p_threshold).collect::<Vec<_>>())
}

/// Per-iteration telemetry of the outer loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpTraceRow {
    pub iteration: usize,
    pub max_sinr_change: f64,
    /// Sum of log2(1 + gamma) at the relaxed iterate.
    pub relaxed_sum_rate: f64,
    pub surrogate_objective: f64,
    pub max_residual: f64,
    pub newton_steps: usize,
}

#[derive(Debug, Clone)]
pub struct GpOutcome {
    pub subset: ActiveSubset,
    /// Relaxed powers of the returned iterate.
    pub powers: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Subproblem error that ended the loop early, if any.
    pub failure: Option<Error>,
    pub trace: Vec<GpTraceRow>,
}

/// Successive GP approximation followed by two-level quantization.
///
/// Starts from full power, solves trust-region subproblems re-centered at the
/// previous solution until the largest SINR change drops to `epsilon`, then
/// thresholds the relaxed powers. If the iteration cap is hit or a
/// subproblem fails twice, the best iterate so far is quantized and
/// `converged` is false. The all-active or all-inactive schedule replaces
/// the quantized one when it has a strictly higher sum-rate.
pub fn gp_schedule(network: &LinkNetwork, cfg: &PowerConfig, settings: &GpSettings) -> Result<GpOutcome> {
    settings.validate()?;
    let mut iterate = GpIterate::uniform(network, cfg.p_max)?;
    let relaxed = |it: &GpIterate| it.sinr_guess.iter().map(|g| g.ln_1p()).sum::<f64>() / std::f64::consts::LN_2;
    let mut best = (relaxed(&iterate), iterate.clone());
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut failure = None;

    while iterations < settings.max_outer_iters {
        iterations += 1;
        let step = match solve_gp_subproblem(network, &iterate, settings, cfg.p_max) {
            Ok(s) => Ok(s),
            Err(Error::InfeasibleSubproblem(_)) | Err(Error::NonConvergence { .. }) => {
                // Re-center at the exact SINRs of the current powers and retry once.
                let recentered = GpIterate::new(iterate.powers.clone(), sinr_all(network, &iterate.powers))?;
                solve_gp_subproblem(network, &recentered, settings, cfg.p_max).map(|s| {
                    iterate = recentered;
                    s
                })
            }
            Err(e) => Err(e),
        };
        let (next, solution) = match step {
            Ok(s) => s,
            Err(e) => {
                failure = Some(e);
                break;
            }
        };
        let change = next
            .sinr_guess
            .iter()
            .zip(&iterate.sinr_guess)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        let rate = relaxed(&next);
        trace.push(GpTraceRow {
            iteration: iterations,
            max_sinr_change: change,
            relaxed_sum_rate: rate,
            surrogate_objective: solution.objective,
            max_residual: solution.max_residual,
            newton_steps: solution.newton_steps,
        });
        if rate >= best.0 {
            best = (rate, next.clone());
        }
        iterate = next;
        if change <= settings.epsilon {
            converged = true;
            break;
        }
    }

    let chosen = if converged { iterate } else { best.1 };
    // Quantizing can land below the trivial schedules; never return worse.
    let mut subset = quantize_powers(&chosen.powers, cfg);
    let mut rate = sum_rate(network, &subset, cfg);
    for candidate in [ActiveSubset::full(network.len()), ActiveSubset::empty()] {
        let r = sum_rate(network, &candidate, cfg);
        if r > rate {
            (subset, rate) = (candidate, r);
        }
    }
    Ok(GpOutcome {
        subset,
        powers: chosen.powers,
        iterations,
        converged,
        failure,
        trace,
    })
}

/// Brute-force maximizer of the two-level sum-rate. Ties go to the smaller
/// subset, then to the lexicographically smaller index list.
pub fn exhaustive_schedule(network: &LinkNetwork, cfg: &PowerConfig) -> Result<(ActiveSubset, f64)> {
    let m = network.len();
    if m > MAX_EXHAUSTIVE_LINKS {
        return Err(Error::InstanceTooLarge {
            size: m,
            limit: MAX_EXHAUSTIVE_LINKS,
        });
    }
    let mut best: Option<(ActiveSubset, f64)> = None;
    let mut powers = vec![cfg.p_low; m];
    for bits in 0u64..(1u64 << m) {
        for (l, p) in powers.iter_mut().enumerate() {
            *p = if bits >> l & 1 == 1 { cfg.p_high } else { cfg.p_low };
        }
        let rate = sum_rate_with_powers(network, &powers);
        let better = match &best {
            None => true,
            Some((s, r)) => {
                rate > *r || (rate == *r && {
                    let cand = ActiveSubset::from_bits(bits, m);
                    (cand.len(), cand.indices()) < (s.len(), s.indices())
                })
            }
        };
        if better {
            best = Some((ActiveSubset::from_bits(bits, m), rate));
        }
    }
    Ok(best.expect("at least one subset"))
}

/// Each of `m` links is active independently with probability `xi`.
pub fn thinning_schedule(m: usize, xi: f64, seed: u64) -> Result<ActiveSubset> {
    if !(0.0..=1.0).contains(&xi) {
        return Err(Error::InvalidProbability(xi));
    }
    let mut rng = rng_from_seed(seed);
    let mask: Vec<bool> = (0..m).map(|_| rng.random::<f64>() < xi).collect();
    Ok(ActiveSubset::from_mask(&mask))
}

/// Link index whose activation frequency estimates the thinning probability.
pub const PROBE_LINK: usize = 0;

/// Fraction of training labels in which the probe link is active.
pub fn estimate_xi(training: &TrainingSet) -> Result<f64> {
    if training.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let hits = training
        .samples()
        .iter()
        .filter(|s| s.label.contains(PROBE_LINK))
        .count();
    Ok(hits as f64 / training.len() as f64)
}

/// Sum-rate of the quantized GP schedule.
pub fn gp_sum_rate(network: &LinkNetwork, cfg: &PowerConfig, settings: &GpSettings) -> Result<(ActiveSubset, f64)> {
    let out = gp_schedule(network, cfg, settings)?;
    let rate = sum_rate(network, &out.subset, cfg);
    Ok((out.subset, rate))
}
