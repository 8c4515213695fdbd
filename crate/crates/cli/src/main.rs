use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sarrm::baselines::PolicyId;
use sarrm::diagnostics::{gradcheck, theorem_suite, GradcheckSetup};
use sarrm::experiment::{
    cmd_baselines, cmd_eval, cmd_generate, cmd_metrics_vs_m, cmd_train, EvalOptions, ExperimentConfig, Split,
};
use sarrm::{Error, Result};

/// Success criterion of the gradient check.
const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Parser, Debug)]
#[command(name = "sarrm", version, about = "State-augmented radio resource management experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML experiment config; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Number of users override.
    #[arg(long = "m-override", global = true)]
    m_override: Option<usize>,
    /// Worker threads (defaults to all cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample and cache a dataset split.
    Generate {
        #[arg(long, default_value = "train")]
        split: String,
    },
    /// Train the state-augmented policy on the cached train split.
    Train {
        /// Resume from this checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Evaluate one policy on the cached test split.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// state_augmented, full_reuse, itlinq or early_stop_<t>.
        #[arg(long, default_value = "state_augmented")]
        policy: String,
        /// Freeze the duals from this time step on.
        #[arg(long = "t-stop")]
        t_stop: Option<usize>,
        /// Also write trace.csv for the first test realization.
        #[arg(long)]
        trace: bool,
        /// Also write cdf.csv of the pooled ergodic rates.
        #[arg(long)]
        cdf: bool,
        /// Comma-separated network sizes; writes metrics_vs_m_<policy>.csv instead.
        #[arg(long = "m-sweep", value_delimiter = ',')]
        m_sweep: Vec<usize>,
    },
    /// Full reuse, ITLinQ and, given a checkpoint, the learned and early-stopped policies.
    Baselines {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        trace: bool,
        #[arg(long)]
        cdf: bool,
    },
    /// Finite-difference check of the episode gradient.
    Gradcheck,
    /// Property battery for the dual dynamics, symmetry and replay.
    TheoremSuite,
    /// Print the effective configuration as TOML.
    ShowConfig,
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let base = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    base.with_overrides(common.seed, common.out.clone(), common.m_override)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.common.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    }
    let mut cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Generate { split } => {
            let split: Split = split.parse()?;
            let manifest = cmd_generate(&cfg, split)?;
            println!(
                "{} {} realizations (m = {}) in {}",
                manifest.count,
                split.as_str(),
                manifest.m,
                cfg.dataset_dir(split).display()
            );
        }
        Command::Train { checkpoint } => {
            let out = cmd_train(&cfg, checkpoint.as_deref())?;
            if let Some(last) = out.log.last() {
                println!(
                    "iteration {}: lagrangian {:.4}, sum rate {:.4}",
                    last.iteration, last.mean_lagrangian, last.mean_sum_rate
                );
            }
            println!("checkpoint: {}", out.checkpoint.display());
            println!("log: {}", out.log_path.display());
        }
        Command::Eval {
            checkpoint,
            policy,
            t_stop,
            trace,
            cdf,
            m_sweep,
        } => {
            let policy: PolicyId = policy.parse()?;
            if t_stop.is_some() {
                cfg.exec.t_stop = t_stop;
                cfg.validate()?;
            }
            if !m_sweep.is_empty() {
                let path = cmd_metrics_vs_m(&cfg, checkpoint.as_deref(), policy, &m_sweep)?;
                println!("{}", path.display());
                return Ok(());
            }
            let out = cmd_eval(&cfg, checkpoint.as_deref(), policy, &EvalOptions { trace, cdf })?;
            report(&out.runs);
            for f in out.files {
                println!("{}", f.display());
            }
        }
        Command::Baselines { checkpoint, trace, cdf } => {
            let out = cmd_baselines(&cfg, checkpoint.as_deref(), &EvalOptions { trace, cdf })?;
            report(&out.runs);
            for f in out.files {
                println!("{}", f.display());
            }
        }
        Command::Gradcheck => {
            let setup = GradcheckSetup {
                seed: cfg.seed,
                ..GradcheckSetup::default()
            };
            let rep = gradcheck(&setup)?;
            println!(
                "{} coordinates, max relative error {:.3e} (tolerance {:.0e})",
                rep.checks.len(),
                rep.max_rel_err,
                GRADCHECK_TOLERANCE
            );
            if !(rep.max_rel_err < GRADCHECK_TOLERANCE) {
                return Err(Error::InvalidGradient(rep.max_rel_err));
            }
        }
        Command::TheoremSuite => {
            let results = theorem_suite(cfg.seed)?;
            let mut failed = 0;
            for r in &results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
                failed += usize::from(!r.passed);
            }
            if failed > 0 {
                return Err(Error::PropertyFailed(failed));
            }
        }
        Command::ShowConfig => print!("{}", cfg.to_toml_string()),
    }
    Ok(())
}

fn report(runs: &[sarrm::experiment::PolicyRun]) {
    for r in runs {
        let s = &r.suite.summary;
        println!(
            "{:<18} mean {:.4}  min(trimmed) {:.4}  p5 {:.4}  feasible {:.3}",
            r.policy.to_string(),
            s.mean_rate,
            s.min_rate_trimmed,
            s.p5_rate,
            s.feasibility_fraction
        );
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
