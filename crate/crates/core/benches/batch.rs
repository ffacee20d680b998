use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use dppl_core::learn::{evaluate_log_likelihood, infer, DppModel, FeatureScaling, InferMode, TrainingSample, TrainingSet};
use dppl_core::net::{generate_network, ActiveSubset, LinkNetwork, PowerConfig};
use dppl_core::par::map_indexed_seq;
#[cfg(feature = "parallel")]
use dppl_core::par::map_indexed_par;
use dppl_core::schedule::{gp_schedule, GpSettings};

fn networks(count: usize, m: usize) -> Vec<LinkNetwork> {
    (0..count as u64).map(|s| generate_network(m, 10.0, 1.0, 2.0, s).unwrap()).collect()
}

fn model_for(nets: &[LinkNetwork], cfg: &PowerConfig) -> DppModel {
    let set = TrainingSet::new(
        nets.iter()
            .map(|n| TrainingSample {
                network: n.clone(),
                label: ActiveSubset::empty(),
            })
            .collect(),
    )
    .unwrap();
    let scaling = FeatureScaling::fit(&set, cfg).unwrap();
    DppModel::new([0.2, -1.0, -0.5], 1.5, Some(scaling)).unwrap()
}

fn labeling(c: &mut Criterion) {
    let cfg = PowerConfig::paper_default();
    let settings = GpSettings::default();
    let nets = networks(8, 10);
    let mut group = c.benchmark_group("gp_labeling");
    group.sample_size(10);
    let label = |i: usize| gp_schedule(&nets[i], &cfg, &settings).unwrap().subset;
    group.bench_function("sequential", |b| b.iter(|| black_box(map_indexed_seq(nets.len(), label))));
    #[cfg(feature = "parallel")]
    group.bench_function("parallel", |b| b.iter(|| black_box(map_indexed_par(nets.len(), label))));
    group.finish();
}

fn inference(c: &mut Criterion) {
    let cfg = PowerConfig::paper_default();
    let mut group = c.benchmark_group("dpp_inference");
    for m in [10, 20, 40] {
        let nets = networks(64, m);
        let model = model_for(&nets, &cfg);
        for (name, mode) in [("map", InferMode::Map), ("sample", InferMode::Sample)] {
            let run = |i: usize| infer(&model, &nets[i], &cfg, mode, i as u64).unwrap();
            group.bench_with_input(BenchmarkId::new(format!("{name}/sequential"), m), &m, |b, _| {
                b.iter(|| black_box(map_indexed_seq(nets.len(), run)))
            });
            #[cfg(feature = "parallel")]
            group.bench_with_input(BenchmarkId::new(format!("{name}/parallel"), m), &m, |b, _| {
                b.iter(|| black_box(map_indexed_par(nets.len(), run)))
            });
        }
    }
    group.finish();
}

fn likelihood(c: &mut Criterion) {
    let cfg = PowerConfig::paper_default();
    let nets = networks(100, 20);
    let model = model_for(&nets, &cfg);
    let set = TrainingSet::new(
        nets.iter()
            .enumerate()
            .map(|(i, n)| TrainingSample {
                network: n.clone(),
                label: ActiveSubset::new(vec![i % 20], 20).unwrap(),
            })
            .collect(),
    )
    .unwrap();
    // The library call dispatches on the `parallel` feature; rebuild with
    // `--no-default-features` for the sequential figure.
    let label = if cfg!(feature = "parallel") { "parallel" } else { "sequential" };
    c.bench_function(&format!("log_likelihood_grad/{label}"), |b| {
        b.iter(|| black_box(evaluate_log_likelihood(&model, &set, &cfg).unwrap()))
    });
}

criterion_group!(benches, labeling, inference, likelihood);
criterion_main!(benches);
