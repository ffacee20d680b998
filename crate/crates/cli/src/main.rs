use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dppl_cli::error::{CliError, CliResult};
use dppl_cli::io::sibling;
use dppl_cli::pipeline;
use dppl_cli::ExperimentConfig;
use dppl_core::InferMode;

#[derive(Parser, Debug)]
#[command(name = "dppl", version, about = "DPP learning for wireless link scheduling")]
struct Cli {
    /// Global RNG seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Write solver telemetry CSV next to the output.
    #[arg(long, global = true)]
    trace: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate random networks as JSON lines.
    Gen {
        #[arg(long)]
        mean_links: Option<f64>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label networks with the GP heuristic (or the exhaustive optimum).
    Label {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        oracle: bool,
    },
    /// Fit the conditional DPP on labeled networks.
    Train {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        model_out: PathBuf,
        #[arg(long)]
        standardize: bool,
    },
    /// Estimate active subsets for networks with a trained model.
    Infer {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Map)]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare GP, DPP and thinning sum-rates on test networks.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        train_labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also run the exhaustive scheduler (networks up to 20 links).
        #[arg(long)]
        oracle: bool,
    },
    /// Time the GP heuristic against DPP inference.
    Bench {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "5,10,15,20")]
        sizes: Vec<usize>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean DPP-MAP sum-rate versus network size.
    Saturate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "10,20,30,40")]
        sizes: Vec<usize>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Map,
    Sample,
}

impl From<Mode> for InferMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Map => InferMode::Map,
            Mode::Sample => InferMode::Sample,
        }
    }
}

fn load_config(cli: &Cli) -> CliResult<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn trace_path(enabled: bool, out: &Path) -> Option<PathBuf> {
    enabled.then(|| sibling(out, "_trace.csv"))
}

fn run(cli: Cli) -> CliResult<()> {
    let mut config = load_config(&cli)?;
    let seed = config.seed;
    match cli.command {
        Command::Gen { mean_links, count, out } => {
            if let Some(mean) = mean_links {
                config.mean_links = mean;
            }
            config.validate()?;
            let count = count.unwrap_or(config.train_count);
            let nets = pipeline::cmd_generate(&config, count, seed, &out)?;
            println!("wrote {} networks to {}", nets.len(), out.display());
        }
        Command::Label { input, out, oracle } => {
            let trace = trace_path(cli.trace, &out);
            let res = pipeline::cmd_label(&input, &config, &out, oracle, trace.as_deref())?;
            println!(
                "labeled {} networks ({} hit the GP iteration cap)",
                res.records.len(),
                res.unconverged
            );
        }
        Command::Train {
            input,
            model_out,
            standardize,
        } => {
            let outcome = pipeline::cmd_train(&input, &config, &model_out, standardize)?;
            println!(
                "log-likelihood {:.6}  gradient norm {:.3e}  iterations {}  sigma {:.6}  theta {:?}",
                outcome.log_likelihood, outcome.grad_norm, outcome.iterations, outcome.model.sigma, outcome.model.theta
            );
            if outcome.floored_kernels > 0 {
                println!("{} training kernels needed eigenvalue flooring", outcome.floored_kernels);
            }
            if let Some(cap) = outcome.sigma_cap {
                println!("largest PSD bandwidth on this training set {cap:.6}");
            }
            if !outcome.converged {
                return Err(CliError::NonConvergence(format!(
                    "training stopped before reaching the gradient tolerance; best model written to {}",
                    model_out.display()
                )));
            }
        }
        Command::Infer {
            model,
            input,
            mode,
            out,
        } => {
            let recs = pipeline::cmd_infer(&model, &input, &config, mode.into(), seed, &out)?;
            println!("wrote {} subsets to {}", recs.len(), out.display());
        }
        Command::Eval {
            model,
            test,
            train_labels,
            out,
            oracle,
        } => {
            let report = pipeline::cmd_eval(&model, &test, &train_labels, &config, seed, oracle, &out)?;
            println!("xi = {:.4}", report.xi);
            for s in &report.summaries {
                println!("{:<11} mean sum-rate {:.4}  mean time {:.3e} s", s.method.name(), s.mean_sum_rate, s.mean_wall_time_s);
            }
        }
        Command::Bench { model, sizes, reps, out } => {
            let reps = reps.unwrap_or(config.bench_reps);
            let rows = pipeline::cmd_bench(&model, &config, &sizes, reps, seed, &out)?;
            for r in rows {
                println!(
                    "M={:<3} {:<11} median {:.3e} s  normalized {:.3e}  speedup {:.1}",
                    r.m,
                    r.method.name(),
                    r.median_s,
                    r.normalized,
                    r.speedup_vs_gp
                );
            }
        }
        Command::Saturate {
            model,
            sizes,
            count,
            out,
        } => {
            let count = count.unwrap_or(config.saturation_count);
            let rows = pipeline::cmd_saturation(&model, &config, &sizes, count, seed, &out)?;
            for r in rows {
                println!("M={:<3} mean {:.4} ± {:.4}", r.m, r.mean_sum_rate, r.stderr);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
