//! Conditional DPP over the links of a network.
//!
//! The kernel factors as `L_ij = g_i S_ij g_j` with log-linear quality
//! `g_i = exp(theta . f_i)` over three per-link features (own received power
//! and the two strongest interfering powers) and a Gaussian similarity on the
//! Tx-Rx cross distances. Parameters are fitted by maximizing the
//! log-likelihood of labeled networks over `(theta, ln sigma)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dpp::{greedy_map, greedy_map_scaled, principal_submatrix, sample_dpp, DppKernel};
use crate::error::{Error, Result};
use crate::net::{distance, ActiveSubset, LinkNetwork, PowerConfig};
use crate::par::{compensated_sum, map_slice};

pub const NUM_FEATURES: usize = 3;
/// Number of trainable parameters: three quality weights and `ln sigma`.
pub const NUM_PARAMS: usize = NUM_FEATURES + 1;
/// Largest quality exponent accepted before reporting a scaling problem.
pub const MAX_EXPONENT: f64 = 700.0;

/// Per-feature affine map `(f - mean) / std` fitted on a training set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaling {
    pub means: [f64; NUM_FEATURES],
    pub stds: [f64; NUM_FEATURES],
}

impl FeatureScaling {
    /// Z-scores each feature over every link of every training network.
    ///
    /// A feature that is constant across the data carries no spread to
    /// standardize; it is divided by its value instead so that it keeps acting
    /// as a bias term.
    pub fn fit(training: &TrainingSet, cfg: &PowerConfig) -> Result<Self> {
        let rows: Vec<LinkFeatures> = training
            .samples()
            .iter()
            .flat_map(|s| (0..s.network.len()).map(move |i| raw_features(&s.network, cfg, i)))
            .collect();
        if rows.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let n = rows.len() as f64;
        let mut means = [0.0; NUM_FEATURES];
        let mut stds = [0.0; NUM_FEATURES];
        for m in 0..NUM_FEATURES {
            let mean = compensated_sum(rows.iter().map(|r| r.0[m])) / n;
            let var = compensated_sum(rows.iter().map(|r| (r.0[m] - mean).powi(2))) / n;
            let std = var.sqrt();
            if std > 1e-12 * mean.abs().max(1.0) {
                means[m] = mean;
                stds[m] = std;
            } else {
                means[m] = 0.0;
                stds[m] = if mean.abs() > 0.0 { mean } else { 1.0 };
            }
        }
        Ok(Self { means, stds })
    }

    pub fn apply(&self, f: &LinkFeatures) -> LinkFeatures {
        let mut out = [0.0; NUM_FEATURES];
        for m in 0..NUM_FEATURES {
            out[m] = (f.0[m] - self.means[m]) / self.stds[m];
        }
        LinkFeatures(out)
    }
}

/// Learned conditional-DPP parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRecord", into = "ModelRecord")]
pub struct DppModel {
    pub theta: [f64; NUM_FEATURES],
    pub sigma: f64,
    pub scaling: Option<FeatureScaling>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelRecord {
    theta: [f64; NUM_FEATURES],
    sigma: f64,
    standardize: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    feature_means: Option<[f64; NUM_FEATURES]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    feature_stds: Option<[f64; NUM_FEATURES]>,
}

impl TryFrom<ModelRecord> for DppModel {
    type Error = Error;

    fn try_from(r: ModelRecord) -> Result<Self> {
        let scaling = match (r.standardize, r.feature_means, r.feature_stds) {
            (false, None, None) => None,
            (true, Some(means), Some(stds)) => Some(FeatureScaling { means, stds }),
            _ => {
                return Err(Error::InvalidParameter(
                    "feature_means/feature_stds must be present exactly when standardize is true".into(),
                ))
            }
        };
        DppModel::new(r.theta, r.sigma, scaling)
    }
}

impl From<DppModel> for ModelRecord {
    fn from(m: DppModel) -> Self {
        ModelRecord {
            theta: m.theta,
            sigma: m.sigma,
            standardize: m.scaling.is_some(),
            feature_means: m.scaling.map(|s| s.means),
            feature_stds: m.scaling.map(|s| s.stds),
        }
    }
}

impl DppModel {
    pub fn new(theta: [f64; NUM_FEATURES], sigma: f64, scaling: Option<FeatureScaling>) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("theta must be finite".into()));
        }
        if let Some(s) = &scaling {
            if s.means.iter().chain(&s.stds).any(|v| !v.is_finite()) || s.stds.iter().any(|&v| v == 0.0) {
                return Err(Error::InvalidParameter("invalid feature scaling".into()));
            }
        }
        Ok(Self { theta, sigma, scaling })
    }

    /// Unit qualities and a bandwidth of a tenth of the deployment radius.
    pub fn initial(disc_radius: f64, scaling: Option<FeatureScaling>) -> Result<Self> {
        Self::new([0.0; NUM_FEATURES], disc_radius / 10.0, scaling)
    }

    /// `[theta_1, theta_2, theta_3, ln sigma]`.
    pub fn params(&self) -> [f64; NUM_PARAMS] {
        [self.theta[0], self.theta[1], self.theta[2], self.sigma.ln()]
    }

    pub fn with_params(&self, w: &[f64; NUM_PARAMS]) -> Result<Self> {
        Self::new([w[0], w[1], w[2]], w[3].exp(), self.scaling)
    }

    /// Features as seen by the quality model (standardized if configured).
    pub fn features(&self, network: &LinkNetwork, cfg: &PowerConfig, i: usize) -> LinkFeatures {
        let f = raw_features(network, cfg, i);
        match &self.scaling {
            Some(s) => s.apply(&f),
            None => f,
        }
    }
}

/// `[zeta_ii p_h, I1, I2]` with `I1 >= I2` the two largest interfering powers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkFeatures(pub [f64; NUM_FEATURES]);

pub fn extract_features(network: &LinkNetwork, cfg: &PowerConfig, i: usize) -> Result<LinkFeatures> {
    if i >= network.len() {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: network.len(),
        });
    }
    Ok(raw_features(network, cfg, i))
}

fn raw_features(network: &LinkNetwork, cfg: &PowerConfig, i: usize) -> LinkFeatures {
    let (mut first, mut second) = (0.0_f64, 0.0_f64);
    for j in (0..network.len()).filter(|&j| j != i) {
        let p = cfg.p_high * network.gain(j, i);
        if p > first {
            second = first;
            first = p;
        } else if p > second {
            second = p;
        }
    }
    LinkFeatures([network.gain(i, i) * cfg.p_high, first, second])
}

fn exponent(model: &DppModel, f: &LinkFeatures) -> Result<f64> {
    let e: f64 = model.theta.iter().zip(&f.0).map(|(t, x)| t * x).sum();
    if !(e.abs() <= MAX_EXPONENT) {
        return Err(Error::FeatureScaling { exponent: e });
    }
    Ok(e)
}

/// `exp(theta . f)`; `f` is taken as already transformed by the model's scaling.
pub fn quality(model: &DppModel, f: &LinkFeatures) -> Result<f64> {
    exponent(model, f).map(f64::exp)
}

/// Squared cross distance `|t_i - r_j|^2 + |t_j - r_i|^2`.
fn cross_distance(network: &LinkNetwork, i: usize, j: usize) -> f64 {
    let (tx, rx) = (network.tx(), network.rx());
    distance(tx[i], rx[j]).powi(2) + distance(tx[j], rx[i]).powi(2)
}

/// Gaussian cross-distance similarity; exactly 1 on the diagonal.
pub fn similarity(network: &LinkNetwork, sigma: f64, i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        (-cross_distance(network, i, j) / (sigma * sigma)).exp()
    }
}

/// Data of one network that does not depend on the parameters.
#[derive(Debug, Clone)]
struct Prepared {
    features: Vec<LinkFeatures>,
    cross: DMatrix<f64>,
    label: Vec<usize>,
}

impl Prepared {
    fn new(model: &DppModel, network: &LinkNetwork, cfg: &PowerConfig, label: &ActiveSubset) -> Self {
        let m = network.len();
        Self {
            features: (0..m).map(|i| model.features(network, cfg, i)).collect(),
            cross: DMatrix::from_fn(m, m, |i, j| if i == j { 0.0 } else { cross_distance(network, i, j) }),
            label: label.indices().to_vec(),
        }
    }

    fn len(&self) -> usize {
        self.features.len()
    }

    fn similarity(&self, sigma: f64) -> DMatrix<f64> {
        let s2 = sigma * sigma;
        DMatrix::from_fn(self.len(), self.len(), |i, j| {
            if i == j {
                1.0
            } else {
                (-self.cross[(i, j)] / s2).exp()
            }
        })
    }

    fn qualities(&self, model: &DppModel) -> Result<Vec<f64>> {
        let exps = self
            .features
            .iter()
            .map(|f| exponent(model, f))
            .collect::<Result<Vec<_>>>()?;
        // L holds g^2, which overflows first; tiny qualities may underflow.
        let top = exps.iter().fold(f64::NEG_INFINITY, |m, &e| m.max(e));
        if 2.0 * top > MAX_EXPONENT {
            return Err(Error::FeatureScaling { exponent: 2.0 * top });
        }
        Ok(exps.into_iter().map(f64::exp).collect())
    }

    fn l_matrix(&self, model: &DppModel) -> Result<(Vec<f64>, DMatrix<f64>, DMatrix<f64>)> {
        let g = self.qualities(model)?;
        let s = self.similarity(model.sigma);
        // Evaluated on the ordered pair so the matrix is exactly symmetric.
        let l = DMatrix::from_fn(self.len(), self.len(), |i, j| {
            let (a, b) = (i.min(j), i.max(j));
            g[a] * s[(a, b)] * g[b]
        });
        Ok((g, s, l))
    }

    /// Log-likelihood of the label and, optionally, its parameter gradient.
    fn evaluate(&self, model: &DppModel, index: usize, with_grad: bool) -> Result<SampleTerms> {
        let (g, s, l) = self.l_matrix(model)?;
        let kernel = DppKernel::new(l)?;
        let log_det_label = kernel.log_det_subset(&self.label);
        if !log_det_label.is_finite() {
            return Err(Error::DegenerateLabel { index });
        }
        let value = log_det_label - kernel.log_normalizer();
        let floored = kernel.floored_count() > 0;
        if !with_grad {
            return Ok(SampleTerms {
                value,
                grad: [0.0; NUM_PARAMS],
                floored,
            });
        }

        let lam = kernel.eigenvalues();
        let v = kernel.eigenvectors();
        let marginal_diag: Vec<f64> = (0..self.len())
            .map(|i| (0..lam.len()).map(|n| lam[n] / (1.0 + lam[n]) * v[(i, n)].powi(2)).sum())
            .collect();
        let mut grad = [0.0; NUM_PARAMS];
        for m in 0..NUM_FEATURES {
            let in_label: f64 = self.label.iter().map(|&i| self.features[i].0[m]).sum();
            let expected: f64 = (0..self.len()).map(|i| self.features[i].0[m] * marginal_diag[i]).sum();
            grad[m] = 2.0 * (in_label - expected);
        }

        // d/d(ln sigma) of S_ij is S_ij * 2 D_ij / sigma^2 off the diagonal.
        let s2 = model.sigma * model.sigma;
        let ds = DMatrix::from_fn(self.len(), self.len(), |i, j| s[(i, j)] * 2.0 * self.cross[(i, j)] / s2);
        let dl = DMatrix::from_fn(self.len(), self.len(), |i, j| g[i] * ds[(i, j)] * g[j]);
        let inv_shifted = v * DMatrix::from_diagonal(&lam.map(|x| 1.0 / (1.0 + x))) * v.transpose();
        let normalizer_term = inv_shifted.component_mul(&dl).sum();
        let label_term = if self.label.len() > 1 {
            let sy = principal_submatrix(&s, &self.label);
            let dsy = principal_submatrix(&ds, &self.label);
            let ch = sy
                .cholesky()
                .ok_or(Error::DegenerateLabel { index })?;
            ch.inverse().component_mul(&dsy).sum()
        } else {
            0.0
        };
        grad[NUM_FEATURES] = label_term - normalizer_term;
        Ok(SampleTerms { value, grad, floored })
    }
}

struct SampleTerms {
    value: f64,
    grad: [f64; NUM_PARAMS],
    floored: bool,
}

/// Matrix `g_i S_ij g_j` before any PSD flooring.
pub fn kernel_matrix(model: &DppModel, network: &LinkNetwork, cfg: &PowerConfig) -> Result<DMatrix<f64>> {
    let prepared = Prepared::new(model, network, cfg, &ActiveSubset::empty());
    prepared.l_matrix(model).map(|(_, _, l)| l)
}

/// Conditional kernel of the network's links under `model`.
pub fn build_kernel(model: &DppModel, network: &LinkNetwork, cfg: &PowerConfig) -> Result<DppKernel> {
    DppKernel::new(kernel_matrix(model, network, cfg)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub network: LinkNetwork,
    pub label: ActiveSubset,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingSet {
    samples: Vec<TrainingSample>,
}

impl TrainingSet {
    pub fn new(samples: Vec<TrainingSample>) -> Result<Self> {
        for s in &samples {
            s.label.validate(s.network.len())?;
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[TrainingSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Keeps the first `k` samples.
    pub fn truncated(&self, k: usize) -> Self {
        Self {
            samples: self.samples.iter().take(k).cloned().collect(),
        }
    }
}

fn prepare(model: &DppModel, training: &TrainingSet, cfg: &PowerConfig) -> Result<Vec<Prepared>> {
    if training.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    Ok(training
        .samples()
        .iter()
        .map(|s| Prepared::new(model, &s.network, cfg, &s.label))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub grad: [f64; NUM_PARAMS],
    /// Number of training kernels whose spectrum needed clamping.
    pub floored_kernels: usize,
}

fn evaluate(prepared: &[Prepared], model: &DppModel, with_grad: bool) -> Result<Evaluation> {
    let terms = map_slice(prepared, |k, p| p.evaluate(model, k, with_grad))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let value = compensated_sum(terms.iter().map(|t| t.value));
    let mut grad = [0.0; NUM_PARAMS];
    for (c, g) in grad.iter_mut().enumerate() {
        *g = compensated_sum(terms.iter().map(|t| t.grad[c]));
    }
    Ok(Evaluation {
        value,
        grad,
        floored_kernels: terms.iter().filter(|t| t.floored).count(),
    })
}

/// Sum over samples of `ln det(L_Y) - ln det(L + I)`.
pub fn log_likelihood(model: &DppModel, training: &TrainingSet, cfg: &PowerConfig) -> Result<f64> {
    evaluate(&prepare(model, training, cfg)?, model, false).map(|e| e.value)
}

/// Gradient of [`log_likelihood`] with respect to `[theta_1, theta_2, theta_3, ln sigma]`.
pub fn grad_log_likelihood(model: &DppModel, training: &TrainingSet, cfg: &PowerConfig) -> Result<[f64; NUM_PARAMS]> {
    evaluate(&prepare(model, training, cfg)?, model, true).map(|e| e.grad)
}

/// Value, gradient and flooring count in one pass.
pub fn evaluate_log_likelihood(model: &DppModel, training: &TrainingSet, cfg: &PowerConfig) -> Result<Evaluation> {
    evaluate(&prepare(model, training, cfg)?, model, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub max_iters: usize,
    pub grad_tolerance: f64,
    pub backtrack: f64,
    pub armijo: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tolerance: 1e-5,
            backtrack: 0.5,
            armijo: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: DppModel,
    pub log_likelihood: f64,
    /// Norm of the gradient projected onto the feasible bandwidth range.
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub floored_kernels: usize,
    /// Largest bandwidth keeping every training similarity matrix PSD
    /// (`None` if no limit was found below [`SIGMA_SEARCH_LIMIT`]).
    pub sigma_cap: Option<f64>,
}

const MAX_BACKTRACKS: usize = 60;
/// Bandwidths beyond this are not probed for the PSD limit.
pub const SIGMA_SEARCH_LIMIT: f64 = 1e3;
const SIGMA_SEARCH_FLOOR: f64 = 1e-6;

fn similarity_is_psd(prepared: &[Prepared], sigma: f64) -> bool {
    prepared.iter().all(|p| {
        let (values, _) = crate::dpp::symmetric_eigen(&p.similarity(sigma));
        values.iter().all(|&v| v >= 0.0)
    })
}

/// Largest bandwidth for which every training similarity matrix is PSD,
/// bracketed geometrically from `start` and refined by bisection in `ln sigma`.
fn sigma_cap(prepared: &[Prepared], start: f64) -> Option<f64> {
    let (mut lo, mut hi);
    if similarity_is_psd(prepared, start) {
        lo = start;
        loop {
            let next = lo * 1.5;
            if next > SIGMA_SEARCH_LIMIT {
                return None;
            }
            if !similarity_is_psd(prepared, next) {
                hi = next;
                break;
            }
            lo = next;
        }
    } else {
        hi = start;
        loop {
            let next = hi / 1.5;
            if next < SIGMA_SEARCH_FLOOR {
                return Some(SIGMA_SEARCH_FLOOR);
            }
            if similarity_is_psd(prepared, next) {
                lo = next;
                break;
            }
            hi = next;
        }
    }
    for _ in 0..40 {
        let mid = (lo * hi).sqrt();
        if similarity_is_psd(prepared, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// Root-mean-square of each feature over the training links, used to scale
/// the first quasi-Newton step.
fn feature_rms(prepared: &[Prepared]) -> [f64; NUM_FEATURES] {
    let count = prepared.iter().map(Prepared::len).sum::<usize>().max(1) as f64;
    std::array::from_fn(|m| {
        let ms = compensated_sum(prepared.iter().flat_map(|p| p.features.iter().map(move |f| f.0[m] * f.0[m]))) / count;
        if ms > 0.0 {
            ms.sqrt()
        } else {
            1.0
        }
    })
}

/// Maximizes the log-likelihood over `(theta, ln sigma)`.
///
/// The Gaussian cross-distance similarity is not PSD for every bandwidth, so
/// `ln sigma` is confined to `(-inf, ln sigma_cap]`, the range where every
/// training similarity matrix is PSD. Ascent directions come from a BFGS
/// inverse-Hessian estimate, restricted to `theta` while the bandwidth sits
/// on its cap with the gradient pushing outward. Steps backtrack until the
/// Armijo condition holds; trial points that overflow the quality model or
/// otherwise fail to evaluate are rejected like any other failed trial.
/// The returned model never has a lower log-likelihood than the (capped)
/// initial model.
pub fn train(
    training: &TrainingSet,
    cfg: &PowerConfig,
    init: &DppModel,
    settings: &TrainSettings,
) -> Result<TrainOutcome> {
    let prepared = prepare(init, training, cfg)?;
    let cap = sigma_cap(&prepared, init.sigma);
    // Strictly inside the PSD range so round-off never trips the kernel check.
    let log_cap = cap.map_or(f64::INFINITY, |c| c.ln() - 1e-9);
    let mut model = init.with_params(&{
        let mut w = init.params();
        w[NUM_FEATURES] = w[NUM_FEATURES].min(log_cap);
        w
    })?;
    let mut current = evaluate(&prepared, &model, true)?;

    let n = NUM_PARAMS;
    let rms = feature_rms(&prepared);
    let initial_inverse = || {
        let mut h = DMatrix::<f64>::identity(n, n);
        for m in 0..NUM_FEATURES {
            h[(m, m)] = 1.0 / (rms[m] * rms[m]);
        }
        h
    };
    let mut inv_hess = initial_inverse();
    let mut fresh = true;
    let mut iterations = 0;

    let sigma_blocked = |w: f64, g: f64| w >= log_cap - 1e-12 && g > 0.0;
    let projected = |model: &DppModel, grad: &[f64; NUM_PARAMS]| {
        let mut g = *grad;
        if sigma_blocked(model.params()[NUM_FEATURES], g[NUM_FEATURES]) {
            g[NUM_FEATURES] = 0.0;
        }
        g
    };
    let norm = |g: &[f64; NUM_PARAMS]| g.iter().map(|x| x * x).sum::<f64>().sqrt();

    while iterations < settings.max_iters && norm(&projected(&model, &current.grad)) > settings.grad_tolerance {
        iterations += 1;
        let pg = projected(&model, &current.grad);
        let blocked = pg[NUM_FEATURES] == 0.0 && current.grad[NUM_FEATURES] != 0.0;
        let grad = DVector::from_column_slice(&pg);
        let mut dir = &inv_hess * &grad;
        if blocked {
            dir[NUM_FEATURES] = 0.0;
        }
        let mut slope = grad.dot(&dir);
        if !(slope > 0.0) {
            inv_hess = initial_inverse();
            fresh = true;
            dir = &inv_hess * &grad;
            slope = grad.dot(&dir);
        }
        if fresh {
            let scale = 1.0 / (slope.sqrt().max(1e-300));
            dir *= scale;
            slope *= scale;
        }

        let w = DVector::from_column_slice(&model.params());
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let mut trial_w = &w + &dir * step;
            trial_w[NUM_FEATURES] = trial_w[NUM_FEATURES].min(log_cap);
            let trial_params: [f64; NUM_PARAMS] = std::array::from_fn(|i| trial_w[i]);
            let gain = grad.dot(&(&trial_w - &w));
            if let Ok(trial) = model.with_params(&trial_params) {
                if let Ok(eval) = evaluate(&prepared, &trial, false) {
                    if eval.value >= current.value + settings.armijo * gain.min(step * slope) && eval.value > current.value
                    {
                        accepted = Some(trial);
                        break;
                    }
                }
            }
            step *= settings.backtrack;
        }
        let next = accepted.and_then(|m| evaluate(&prepared, &m, true).ok().map(|e| (m, e)));
        let Some((next_model, next)) = next else {
            if fresh {
                break;
            }
            inv_hess = initial_inverse();
            fresh = true;
            continue;
        };

        let s = DVector::from_column_slice(&next_model.params()) - &w;
        // Curvature pair for minimizing the negative log-likelihood.
        let y = DVector::from_column_slice(&current.grad) - DVector::from_column_slice(&next.grad);
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if fresh {
                let h0 = initial_inverse();
                let ratio = sy / y.dot(&(&h0.try_inverse().expect("diagonal") * &y)).max(1e-300);
                inv_hess = initial_inverse() * ratio.max(1e-300);
                fresh = false;
            }
            let rho = 1.0 / sy;
            let eye = DMatrix::<f64>::identity(n, n);
            let left = &eye - &s * y.transpose() * rho;
            let right = &eye - &y * s.transpose() * rho;
            inv_hess = &left * &inv_hess * &right + &s * s.transpose() * rho;
        }
        model = next_model;
        current = next;
    }

    let grad_norm = norm(&projected(&model, &current.grad));
    Ok(TrainOutcome {
        model,
        log_likelihood: current.value,
        grad_norm,
        iterations,
        converged: grad_norm <= settings.grad_tolerance,
        floored_kernels: current.floored_kernels,
        sigma_cap: cap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InferMode {
    Sample,
    Map,
}

/// The model's bandwidth, lowered to this network's PSD limit when the
/// similarity would otherwise be indefinite. The trainer applies the same cap
/// over its training networks, so fitted models are unaffected on them.
pub fn inference_sigma(model: &DppModel, network: &LinkNetwork, cfg: &PowerConfig) -> f64 {
    let prepared = [Prepared::new(model, network, cfg, &ActiveSubset::empty())];
    if similarity_is_psd(&prepared, model.sigma) {
        model.sigma
    } else {
        sigma_cap(&prepared, model.sigma).unwrap_or(model.sigma)
    }
}

fn with_inference_sigma(model: &DppModel, network: &LinkNetwork, cfg: &PowerConfig) -> Result<DppModel> {
    let mut w = model.params();
    w[NUM_FEATURES] = inference_sigma(model, network, cfg).ln();
    model.with_params(&w)
}

/// Active-link estimate for a network: a DPP sample or the greedy MAP set.
///
/// The bandwidth is clipped to the network's PSD limit (see
/// [`inference_sigma`]). MAP also works when the squared qualities overflow,
/// as long as every log-quality is finite.
pub fn infer(
    model: &DppModel,
    network: &LinkNetwork,
    cfg: &PowerConfig,
    mode: InferMode,
    seed: u64,
) -> Result<ActiveSubset> {
    let kernel = match build_kernel(model, network, cfg) {
        Err(Error::PsdViolation { .. }) => build_kernel(&with_inference_sigma(model, network, cfg)?, network, cfg),
        other => other,
    };
    let picked = match (mode, kernel) {
        (InferMode::Sample, kernel) => sample_dpp(&kernel?, seed),
        (InferMode::Map, Ok(kernel)) => greedy_map(&kernel),
        // Rank in the log domain, which never exponentiates.
        (InferMode::Map, Err(e @ Error::FeatureScaling { .. })) => {
            let logs: Vec<f64> = (0..network.len())
                .map(|i| {
                    let f = model.features(network, cfg, i);
                    model.theta.iter().zip(&f.0).map(|(t, x)| t * x).sum()
                })
                .collect();
            if logs.iter().any(|v: &f64| !v.is_finite()) {
                return Err(e);
            }
            let sigma = inference_sigma(model, network, cfg);
            let s = DMatrix::from_fn(network.len(), network.len(), |i, j| {
                similarity(network, sigma, i.min(j), i.max(j))
            });
            greedy_map_scaled(&logs, &s)?
        }
        (InferMode::Map, Err(e)) => return Err(e),
    };
    ActiveSubset::new(picked, network.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::generate_network;
    use approx::assert_relative_eq;

    fn cfg() -> PowerConfig {
        PowerConfig::paper_default()
    }

    #[test]
    fn single_link_features_fill_zero() {
        let n = generate_network(1, 10.0, 1.0, 2.0, 4).unwrap();
        let f = extract_features(&n, &cfg(), 0).unwrap();
        assert_relative_eq!(f.0[0], cfg().p_high, max_relative = 1e-12);
        assert_eq!((f.0[1], f.0[2]), (0.0, 0.0));
        assert!(matches!(extract_features(&n, &cfg(), 1), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn two_link_features() {
        let n = generate_network(2, 10.0, 1.0, 2.0, 8).unwrap();
        for i in 0..2 {
            let f = extract_features(&n, &cfg(), i).unwrap();
            assert_relative_eq!(f.0[1], cfg().p_high * n.gain(1 - i, i), max_relative = 1e-12);
            assert_eq!(f.0[2], 0.0);
        }
    }

    #[test]
    fn quality_examples() {
        let zero = DppModel::new([0.0; 3], 1.0, None).unwrap();
        assert_eq!(quality(&zero, &LinkFeatures([5.0, 3.0, 1.0])).unwrap(), 1.0);
        let unit = DppModel::new([1.0, 0.0, 0.0], 1.0, None).unwrap();
        assert_relative_eq!(quality(&unit, &LinkFeatures([2f64.ln(), 7.0, 9.0])).unwrap(), 2.0, max_relative = 1e-15);
        assert!(matches!(
            quality(&unit, &LinkFeatures([701.0, 0.0, 0.0])),
            Err(Error::FeatureScaling { .. })
        ));
    }

    #[test]
    fn similarity_examples() {
        let n = LinkNetwork::from_positions(vec![[0.0, 0.0], [3.0, 0.0]], vec![[1.0, 0.0], [3.0, 1.0]], 1.0, 2.0).unwrap();
        assert_eq!(similarity(&n, 0.7, 1, 1), 1.0);
        // |t0 - r1|^2 = 9 + 1, |t1 - r0|^2 = 4.
        let expected = (-(10.0 + 4.0) / 4.0_f64).exp();
        assert_relative_eq!(similarity(&n, 2.0, 0, 1), expected, max_relative = 1e-14);
        assert_eq!(similarity(&n, 2.0, 0, 1), similarity(&n, 2.0, 1, 0));
        let far = LinkNetwork::from_positions(vec![[0.0, 0.0], [1e4, 0.0]], vec![[1.0, 0.0], [1e4, 1.0]], 1.0, 2.0).unwrap();
        assert_eq!(similarity(&far, 1.0, 0, 1), 0.0);
    }

    #[test]
    fn single_link_kernel_and_likelihood() {
        let n = generate_network(1, 10.0, 1.0, 2.0, 2).unwrap();
        let model = DppModel::new([0.3, 0.0, 0.0], 1.0, Some(FeatureScaling { means: [0.0; 3], stds: [1995.26; 3] })).unwrap();
        let g = quality(&model, &model.features(&n, &cfg(), 0)).unwrap();
        let l = kernel_matrix(&model, &n, &cfg()).unwrap();
        assert_relative_eq!(l[(0, 0)], g * g, max_relative = 1e-14);
        let set = TrainingSet::new(vec![TrainingSample {
            network: n,
            label: ActiveSubset::full(1),
        }])
        .unwrap();
        let ll = log_likelihood(&model, &set, &cfg()).unwrap();
        assert_relative_eq!(ll, (g * g / (1.0 + g * g)).ln(), max_relative = 1e-12);
    }

    #[test]
    fn empty_label_is_allowed_but_empty_set_is_not() {
        let n = generate_network(3, 10.0, 1.0, 2.0, 2).unwrap();
        let model = DppModel::initial(10.0, None).unwrap();
        let set = TrainingSet::new(vec![TrainingSample {
            network: n,
            label: ActiveSubset::empty(),
        }])
        .unwrap();
        assert!(log_likelihood(&model, &set, &cfg()).unwrap() < 0.0);
        assert!(matches!(
            log_likelihood(&model, &TrainingSet::default(), &cfg()),
            Err(Error::EmptyTrainingSet)
        ));
    }

    #[test]
    fn model_json_keys() {
        let plain = DppModel::new([1.0, 2.0, 3.0], 0.5, None).unwrap();
        let v: serde_json::Value = serde_json::to_value(plain).unwrap();
        assert_eq!(v["standardize"], false);
        assert!(v.get("feature_means").is_none());
        let scaled = DppModel::new([1.0, 2.0, 3.0], 0.5, Some(FeatureScaling { means: [1.0; 3], stds: [2.0; 3] })).unwrap();
        let text = serde_json::to_string(&scaled).unwrap();
        assert_eq!(serde_json::from_str::<DppModel>(&text).unwrap(), scaled);
        let broken = r#"{"theta":[0,0,0],"sigma":1.0,"standardize":true}"#;
        assert!(serde_json::from_str::<DppModel>(broken).is_err());
    }

    #[test]
    fn constant_feature_becomes_bias() {
        let nets: Vec<_> = (0..4).map(|s| generate_network(5, 10.0, 1.0, 2.0, s).unwrap()).collect();
        let set = TrainingSet::new(
            nets.into_iter()
                .map(|network| TrainingSample {
                    network,
                    label: ActiveSubset::empty(),
                })
                .collect(),
        )
        .unwrap();
        let sc = FeatureScaling::fit(&set, &cfg()).unwrap();
        let f = sc.apply(&extract_features(&set.samples()[0].network, &cfg(), 0).unwrap());
        assert_relative_eq!(f.0[0], 1.0, max_relative = 1e-12);
    }
}
