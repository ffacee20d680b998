//! Experiment commands: dataset generation, labeling, training, inference,
//! evaluation, run-time benchmarking and the saturation sweep.
//!
//! Per-network work runs through [`dppl_core::par`] with seeds derived from
//! the global seed and the network id, and results are always emitted in
//! network-id order.

use std::fmt;
use std::path::Path;
use std::time::Instant;

use dppl_core::learn::{self, DppModel, FeatureScaling, InferMode, TrainOutcome, TrainingSet};
use dppl_core::net::{generate_network, sample_network_size, sum_rate};
use dppl_core::par::{compensated_sum, map_indexed, map_slice};
use dppl_core::rng::{derive_seed, sub_seed};
use dppl_core::schedule::{self, estimate_xi, exhaustive_schedule, gp_schedule, thinning_schedule, GpTraceRow};
use dppl_core::{ActiveSubset, LinkNetwork, PowerConfig};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::io::{self, LabeledRecord, NetworkLine, SubsetRecord};

/// Network `id` of a dataset drawn with `seed`: Poisson size (zero rejected),
/// uniform Tx in the disc.
pub fn network_for(config: &ExperimentConfig, seed: u64, id: usize) -> CliResult<LinkNetwork> {
    let item = derive_seed(seed, id as u64);
    let m = sample_network_size(config.mean_links, sub_seed(item, "size"))?;
    fixed_size_network(config, m, sub_seed(item, "geometry"))
}

pub fn fixed_size_network(config: &ExperimentConfig, m: usize, seed: u64) -> CliResult<LinkNetwork> {
    Ok(generate_network(
        m,
        config.disc_radius,
        config.link_distance,
        config.alpha,
        seed,
    )?)
}

pub fn generate_networks(config: &ExperimentConfig, count: usize, seed: u64) -> CliResult<Vec<LinkNetwork>> {
    map_indexed(count, |id| network_for(config, seed, id))
        .into_iter()
        .collect()
}

/// Writes `count` networks as JSON lines.
pub fn cmd_generate(config: &ExperimentConfig, count: usize, seed: u64, out: &Path) -> CliResult<Vec<LinkNetwork>> {
    if count == 0 {
        return Err(CliError::Invalid("count must be at least 1".into()));
    }
    let networks = generate_networks(config, count, seed)?;
    let records: Vec<_> = networks.iter().map(LinkNetwork::to_record).collect();
    io::write_jsonl(out, &records)?;
    Ok(networks)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "gp")]
    Gp,
    #[serde(rename = "exhaustive")]
    Exhaustive,
    #[serde(rename = "dpp-map")]
    DppMap,
    #[serde(rename = "dpp-sample")]
    DppSample,
    #[serde(rename = "thinning")]
    Thinning,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Gp,
        Method::Exhaustive,
        Method::DppMap,
        Method::DppSample,
        Method::Thinning,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Gp => "gp",
            Method::Exhaustive => "exhaustive",
            Method::DppMap => "dpp-map",
            Method::DppSample => "dpp-sample",
            Method::Thinning => "thinning",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct LabelOutput {
    pub records: Vec<LabeledRecord>,
    /// `(network_id, row)` telemetry of every GP outer iteration.
    pub trace: Vec<(usize, GpTraceRow)>,
    pub unconverged: usize,
}

/// Labels each network with the GP schedule, or with the exhaustive optimum
/// when `oracle` is set.
pub fn label_networks(
    networks: &[LinkNetwork],
    config: &ExperimentConfig,
    oracle: bool,
) -> CliResult<LabelOutput> {
    let cfg = config.power_config()?;
    if oracle {
        if let Some(big) = networks.iter().find(|n| n.len() > schedule::MAX_EXHAUSTIVE_LINKS) {
            return Err(dppl_core::Error::InstanceTooLarge {
                size: big.len(),
                limit: schedule::MAX_EXHAUSTIVE_LINKS,
            }
            .into());
        }
    }
    let results = map_slice(networks, |_, n| -> CliResult<_> {
        let start = Instant::now();
        if oracle {
            let (subset, _) = exhaustive_schedule(n, &cfg)?;
            Ok((subset, start.elapsed().as_secs_f64(), true, Vec::new()))
        } else {
            let out = gp_schedule(n, &cfg, &config.gp)?;
            Ok((out.subset, start.elapsed().as_secs_f64(), out.converged, out.trace))
        }
    });
    let mut records = Vec::with_capacity(networks.len());
    let mut trace = Vec::new();
    let mut unconverged = 0;
    for (id, (network, result)) in networks.iter().zip(results).enumerate() {
        let (subset, secs, converged, rows) = result?;
        if !converged {
            unconverged += 1;
        }
        trace.extend(rows.into_iter().map(|r| (id, r)));
        records.push(LabeledRecord {
            network: network.clone(),
            optimal_subset: subset,
            solver_time_s: Some(secs),
            converged: Some(converged),
        });
    }
    Ok(LabelOutput {
        records,
        trace,
        unconverged,
    })
}

pub fn cmd_label(
    networks_path: &Path,
    config: &ExperimentConfig,
    out: &Path,
    oracle: bool,
    trace_path: Option<&Path>,
) -> CliResult<LabelOutput> {
    let networks: Vec<LinkNetwork> = io::read_networks(networks_path)?
        .into_iter()
        .map(|l| l.network)
        .collect();
    let output = label_networks(&networks, config, oracle)?;
    io::write_jsonl(out, &output.records)?;
    if let Some(path) = trace_path {
        write_trace(path, &output.trace)?;
    }
    Ok(output)
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    CliError::Invalid(format!("{}: {e}", path.display()))
}

#[derive(Debug, Serialize)]
struct TraceCsvRow {
    network_id: usize,
    iteration: usize,
    max_sinr_change: f64,
    relaxed_sum_rate: f64,
    surrogate_objective: f64,
    max_residual: f64,
    newton_steps: usize,
}

pub fn write_trace(path: &Path, rows: &[(usize, GpTraceRow)]) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    for (id, r) in rows {
        w.serialize(TraceCsvRow {
            network_id: *id,
            iteration: r.iteration,
            max_sinr_change: r.max_sinr_change,
            relaxed_sum_rate: r.relaxed_sum_rate,
            surrogate_objective: r.surrogate_objective,
            max_residual: r.max_residual,
            newton_steps: r.newton_steps,
        })
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Fits the conditional DPP, starting from unit qualities and
/// `sigma = disc_radius / 10`.
pub fn train_model(training: &TrainingSet, config: &ExperimentConfig, standardize: bool) -> CliResult<TrainOutcome> {
    let cfg = config.power_config()?;
    let scaling = if standardize {
        Some(FeatureScaling::fit(training, &cfg)?)
    } else {
        None
    };
    let init = DppModel::initial(config.disc_radius, scaling)?;
    Ok(learn::train(training, &cfg, &init, &config.training)?)
}

/// Trains on a labeled file and writes the model even when the optimizer
/// stops at the iteration cap; that case is reported as an error afterwards.
pub fn cmd_train(
    labeled_path: &Path,
    config: &ExperimentConfig,
    model_out: &Path,
    standardize: bool,
) -> CliResult<TrainOutcome> {
    let training = io::read_training_set(labeled_path)?;
    let outcome = train_model(&training, config, standardize)?;
    io::write_model(model_out, &outcome.model)?;
    Ok(outcome)
}

pub fn cmd_infer(
    model_path: &Path,
    networks_path: &Path,
    config: &ExperimentConfig,
    mode: InferMode,
    seed: u64,
    out: &Path,
) -> CliResult<Vec<SubsetRecord>> {
    let model = io::read_model(model_path)?;
    let cfg = config.power_config()?;
    let lines = io::read_networks(networks_path)?;
    let subsets = map_slice(&lines, |id, l| {
        learn::infer(&model, &l.network, &cfg, mode, sub_seed(derive_seed(seed, id as u64), "sample"))
    });
    let records = subsets
        .into_iter()
        .enumerate()
        .map(|(id, s)| {
            Ok(SubsetRecord {
                network_id: id,
                mode: mode_name(mode).into(),
                subset: s?,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    io::write_jsonl(out, &records)?;
    Ok(records)
}

pub fn mode_name(mode: InferMode) -> &'static str {
    match mode {
        InferMode::Map => "map",
        InferMode::Sample => "sample",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub network_id: usize,
    pub method: Method,
    pub m: usize,
    pub sum_rate: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub count: usize,
    pub mean_sum_rate: f64,
    pub mean_wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub xi: f64,
    pub methods: Vec<Method>,
    pub records: Vec<EvalRecord>,
    pub summaries: Vec<MethodSummary>,
    /// Sum-rate grid and the empirical CDF of each method on it.
    pub cdf_grid: Vec<f64>,
    pub cdf: Vec<Vec<f64>>,
}

impl EvalReport {
    pub fn mean(&self, method: Method) -> Option<f64> {
        self.summaries
            .iter()
            .find(|s| s.method == method)
            .map(|s| s.mean_sum_rate)
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

/// Runs every method on each test network. GP labels already present in the
/// test file are reused together with their recorded solver time.
pub fn evaluate(
    model: &DppModel,
    tests: &[NetworkLine],
    xi: f64,
    config: &ExperimentConfig,
    seed: u64,
    with_oracle: bool,
) -> CliResult<EvalReport> {
    let cfg = config.power_config()?;
    let mut methods = vec![Method::Gp, Method::DppMap, Method::DppSample, Method::Thinning];
    if with_oracle {
        methods.insert(1, Method::Exhaustive);
    }
    let per_network = map_slice(tests, |id, line| -> CliResult<Vec<EvalRecord>> {
        let net = &line.network;
        let item = derive_seed(seed, id as u64);
        let mut rows = Vec::new();
        for &method in &methods {
            let (subset, secs) = match method {
                Method::Gp => match (&line.optimal_subset, line.solver_time_s) {
                    (Some(s), Some(t)) => (s.clone(), t),
                    _ => {
                        let (out, t) = timed(|| gp_schedule(net, &cfg, &config.gp));
                        (out?.subset, t)
                    }
                },
                Method::Exhaustive => {
                    let (out, t) = timed(|| exhaustive_schedule(net, &cfg));
                    (out?.0, t)
                }
                Method::DppMap => {
                    let (out, t) = timed(|| learn::infer(model, net, &cfg, InferMode::Map, 0));
                    (out?, t)
                }
                Method::DppSample => {
                    let s = sub_seed(item, "sample");
                    let (out, t) = timed(|| learn::infer(model, net, &cfg, InferMode::Sample, s));
                    (out?, t)
                }
                Method::Thinning => {
                    let s = sub_seed(item, "thinning");
                    let (out, t) = timed(|| thinning_schedule(net.len(), xi, s));
                    (out?, t)
                }
            };
            rows.push(EvalRecord {
                network_id: id,
                method,
                m: net.len(),
                sum_rate: sum_rate(net, &subset, &cfg),
                wall_time_s: secs,
            });
        }
        Ok(rows)
    });
    let mut records = Vec::new();
    for rows in per_network {
        records.extend(rows?);
    }
    Ok(summarize(xi, methods, records, config.cdf_points))
}

fn summarize(xi: f64, methods: Vec<Method>, records: Vec<EvalRecord>, points: usize) -> EvalReport {
    let summaries = methods
        .iter()
        .map(|&method| {
            let rows: Vec<&EvalRecord> = records.iter().filter(|r| r.method == method).collect();
            let n = rows.len().max(1) as f64;
            MethodSummary {
                method,
                count: rows.len(),
                mean_sum_rate: compensated_sum(rows.iter().map(|r| r.sum_rate)) / n,
                mean_wall_time_s: compensated_sum(rows.iter().map(|r| r.wall_time_s)) / n,
            }
        })
        .collect();
    let top = records.iter().fold(0.0_f64, |m, r| m.max(r.sum_rate));
    let grid: Vec<f64> = (0..points)
        .map(|i| top * i as f64 / (points - 1) as f64)
        .collect();
    let cdf = methods
        .iter()
        .map(|&method| {
            let mut rates: Vec<f64> = records
                .iter()
                .filter(|r| r.method == method)
                .map(|r| r.sum_rate)
                .collect();
            rates.sort_by(f64::total_cmp);
            let n = rates.len().max(1) as f64;
            grid.iter()
                .map(|&x| rates.partition_point(|&r| r <= x) as f64 / n)
                .collect()
        })
        .collect();
    EvalReport {
        xi,
        methods,
        records,
        summaries,
        cdf_grid: grid,
        cdf,
    }
}

/// Writes the per-network CSV, `<stem>_cdf.csv` and `<stem>_summary.json`.
pub fn write_eval(report: &EvalReport, out: &Path) -> CliResult<()> {
    let mut w = csv_writer(out)?;
    w.write_record(["network_id", "method", "m", "sum_rate", "wall_time_s"])
        .map_err(|e| csv_error(out, e))?;
    for r in &report.records {
        w.write_record([
            r.network_id.to_string(),
            r.method.to_string(),
            r.m.to_string(),
            r.sum_rate.to_string(),
            r.wall_time_s.to_string(),
        ])
        .map_err(|e| csv_error(out, e))?;
    }
    w.flush().map_err(|e| CliError::io(out, e))?;

    let cdf_path = io::sibling(out, "_cdf.csv");
    let mut w = csv_writer(&cdf_path)?;
    let mut header = vec!["sum_rate".to_string()];
    header.extend(report.methods.iter().map(|m| m.to_string()));
    w.write_record(&header).map_err(|e| csv_error(&cdf_path, e))?;
    for (i, x) in report.cdf_grid.iter().enumerate() {
        let mut row = vec![x.to_string()];
        row.extend(report.cdf.iter().map(|c| c[i].to_string()));
        w.write_record(&row).map_err(|e| csv_error(&cdf_path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&cdf_path, e))?;

    #[derive(Serialize)]
    struct Summary<'a> {
        xi: f64,
        networks: usize,
        methods: &'a [MethodSummary],
    }
    let summary_path = io::sibling(out, "_summary.json");
    let networks = report.records.iter().map(|r| r.network_id).max().map_or(0, |m| m + 1);
    let text = serde_json::to_string_pretty(&Summary {
        xi: report.xi,
        networks,
        methods: &report.summaries,
    })
    .map_err(|e| CliError::Invalid(e.to_string()))?;
    std::fs::write(&summary_path, text + "\n").map_err(|e| CliError::io(&summary_path, e))
}

pub fn read_eval_csv(path: &Path) -> CliResult<Vec<EvalRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| csv_error(path, e)))
        .collect()
}

pub fn cmd_eval(
    model_path: &Path,
    test_path: &Path,
    train_labels_path: &Path,
    config: &ExperimentConfig,
    seed: u64,
    with_oracle: bool,
    out: &Path,
) -> CliResult<EvalReport> {
    let model = io::read_model(model_path)?;
    let tests = io::read_networks(test_path)?;
    let training = io::read_training_set(train_labels_path)?;
    let xi = estimate_xi(&training)?;
    let report = evaluate(&model, &tests, xi, config, seed, with_oracle)?;
    write_eval(&report, out)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub m: usize,
    pub method: Method,
    pub runs: usize,
    pub median_s: f64,
    pub mean_s: f64,
    /// Mean run time divided by the mean GP run time at M = 5.
    pub normalized: f64,
    /// Median GP time over this method's median time at the same M.
    pub speedup_vs_gp: f64,
}

pub const NORMALIZATION_SIZE: usize = 5;

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Times `(gp, dpp-map, dpp-sample)` on `reps` networks of size `m`. Runs
/// sequentially so the timings do not compete for cores.
fn time_size(
    model: &DppModel,
    config: &ExperimentConfig,
    cfg: &PowerConfig,
    m: usize,
    reps: usize,
    seed: u64,
) -> CliResult<[Vec<f64>; 3]> {
    let mut times: [Vec<f64>; 3] = Default::default();
    for r in 0..reps {
        let item = derive_seed(sub_seed(seed, "bench"), (m as u64) << 32 | r as u64);
        let net = fixed_size_network(config, m, item)?;
        let (gp, t) = timed(|| gp_schedule(&net, cfg, &config.gp));
        gp?;
        times[0].push(t);
        let (map, t) = timed(|| learn::infer(model, &net, cfg, InferMode::Map, 0));
        map?;
        times[1].push(t);
        let (sample, t) = timed(|| learn::infer(model, &net, cfg, InferMode::Sample, item));
        sample?;
        times[2].push(t);
    }
    Ok(times)
}

pub fn benchmark(
    model: &DppModel,
    config: &ExperimentConfig,
    sizes: &[usize],
    reps: usize,
    seed: u64,
) -> CliResult<Vec<BenchRow>> {
    if sizes.is_empty() || sizes.contains(&0) || reps == 0 {
        return Err(CliError::Invalid("need positive sizes and repetitions".into()));
    }
    let cfg = config.power_config()?;
    let mut per_size = Vec::new();
    for &m in sizes {
        per_size.push((m, time_size(model, config, &cfg, m, reps, seed)?));
    }
    let anchor_times = match per_size.iter().find(|(m, _)| *m == NORMALIZATION_SIZE) {
        Some((_, t)) => t[0].clone(),
        None => time_size(model, config, &cfg, NORMALIZATION_SIZE, reps, seed)?[0].clone(),
    };
    let anchor = anchor_times.iter().sum::<f64>() / anchor_times.len() as f64;

    let mut rows = Vec::new();
    for (m, mut times) in per_size {
        let gp_median = median(&mut times[0]);
        for (k, method) in [Method::Gp, Method::DppMap, Method::DppSample].into_iter().enumerate() {
            let mean = times[k].iter().sum::<f64>() / times[k].len() as f64;
            let med = median(&mut times[k]);
            rows.push(BenchRow {
                m,
                method,
                runs: times[k].len(),
                median_s: med,
                mean_s: mean,
                normalized: mean / anchor,
                speedup_vs_gp: gp_median / med,
            });
        }
    }
    Ok(rows)
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn cmd_bench(
    model_path: &Path,
    config: &ExperimentConfig,
    sizes: &[usize],
    reps: usize,
    seed: u64,
    out: &Path,
) -> CliResult<Vec<BenchRow>> {
    let model = io::read_model(model_path)?;
    let rows = benchmark(&model, config, sizes, reps, seed)?;
    write_rows(out, &rows)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationRow {
    pub m: usize,
    pub networks: usize,
    pub mean_sum_rate: f64,
    pub stderr: f64,
    /// Change of the mean from the previous size; empty for the first row.
    pub increment: Option<f64>,
}

/// Mean DPP-MAP sum-rate over `count` networks of each size.
pub fn saturation(
    model: &DppModel,
    config: &ExperimentConfig,
    sizes: &[usize],
    count: usize,
    seed: u64,
) -> CliResult<Vec<SaturationRow>> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) || sizes[0] == 0 {
        return Err(CliError::Invalid("sizes must be positive and strictly ascending".into()));
    }
    if count < 2 {
        return Err(CliError::Invalid("need at least two networks per size".into()));
    }
    let cfg = config.power_config()?;
    let mut rows: Vec<SaturationRow> = Vec::new();
    for &m in sizes {
        let rates = map_indexed(count, |r| -> CliResult<f64> {
            let item = derive_seed(sub_seed(seed, "saturation"), (m as u64) << 32 | r as u64);
            let net = fixed_size_network(config, m, item)?;
            let subset = learn::infer(model, &net, &cfg, InferMode::Map, 0)?;
            Ok(sum_rate(&net, &subset, &cfg))
        })
        .into_iter()
        .collect::<CliResult<Vec<f64>>>()?;
        let n = rates.len() as f64;
        let mean = compensated_sum(rates.iter().copied()) / n;
        let var = compensated_sum(rates.iter().map(|r| (r - mean).powi(2))) / (n - 1.0);
        rows.push(SaturationRow {
            m,
            networks: rates.len(),
            mean_sum_rate: mean,
            stderr: (var / n).sqrt(),
            increment: rows.last().map(|p| mean - p.mean_sum_rate),
        });
    }
    Ok(rows)
}

pub fn cmd_saturation(
    model_path: &Path,
    config: &ExperimentConfig,
    sizes: &[usize],
    count: usize,
    seed: u64,
    out: &Path,
) -> CliResult<Vec<SaturationRow>> {
    let model = io::read_model(model_path)?;
    let rows = saturation(&model, config, sizes, count, seed)?;
    write_rows(out, &rows)?;
    Ok(rows)
}

/// Labels as a training set, for the thinning probability and training.
pub fn training_set(records: &[LabeledRecord]) -> CliResult<TrainingSet> {
    Ok(TrainingSet::new(
        records
            .iter()
            .map(|r| learn::TrainingSample {
                network: r.network.clone(),
                label: r.optimal_subset.clone(),
            })
            .collect(),
    )?)
}

/// Test lines carrying their GP labels and solver times.
pub fn labeled_lines(records: &[LabeledRecord]) -> Vec<NetworkLine> {
    records
        .iter()
        .map(|r| NetworkLine {
            network: r.network.clone(),
            optimal_subset: Some(r.optimal_subset.clone()),
            solver_time_s: r.solver_time_s,
        })
        .collect()
}

pub fn is_valid_subset(subset: &ActiveSubset, m: usize) -> bool {
    subset.validate(m).is_ok()
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(64) })]

        #[test]
        fn cdf_is_monotone_and_complete(rates in prop::collection::vec((0.0f64..50.0, 0.0f64..50.0), 1..30)) {
            let records: Vec<EvalRecord> = rates
                .iter()
                .enumerate()
                .flat_map(|(id, &(a, b))| {
                    [(Method::Gp, a), (Method::DppMap, b)].map(|(method, sum_rate)| EvalRecord {
                        network_id: id,
                        method,
                        m: 1,
                        sum_rate,
                        wall_time_s: 0.0,
                    })
                })
                .collect();
            let report = summarize(0.5, vec![Method::Gp, Method::DppMap], records, 21);
            prop_assert!(report.cdf_grid.windows(2).all(|w| w[0] <= w[1]));
            for column in &report.cdf {
                prop_assert!(column.windows(2).all(|w| w[0] <= w[1]));
                prop_assert_eq!(*column.last().unwrap(), 1.0);
            }
        }
    }
}
