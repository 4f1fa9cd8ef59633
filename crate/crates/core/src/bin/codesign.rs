use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use codesign::harness::experiments::{
    capacity_sweep, checkpoint, compare_policies, default_capacity_points, load_checkpoint, run_trials, sweep_both,
    train_stage, write_run, write_sweep_csv, Stage,
};
use codesign::harness::ExperimentConfig;
use codesign::policies::{CoDesignPolicy, Estimator};
use codesign::Result;

#[derive(Parser)]
#[command(name = "codesign", version, about = "Communication-control co-design experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Trials {
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    Control,
    Estimator,
    Qos,
    Synthesis,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Train one stage (or all) and write checkpoints.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "all")]
        stage: StageArg,
    },
    /// Evaluate the co-design policy with `plants` loops on the shared network.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        trials: Trials,
        /// Policy checkpoint; defaults to the co-design checkpoint.
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Compare the three policy variants.
    Compare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        trials: Trials,
    },
    /// Success rate versus number of plants sharing the network.
    Capacity {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        trials: Trials,
    },
    /// Train and score the QoS policy for each λ in the config.
    SweepLambda {
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
        cfg.train.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out_dir = o.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { common, stage } => {
            let cfg = load(&common)?;
            let stages: Vec<Stage> = match stage {
                StageArg::Control => vec![Stage::Control],
                StageArg::Estimator => vec![Stage::Estimator],
                StageArg::Qos => vec![Stage::Qos],
                StageArg::Synthesis => vec![Stage::Synthesis],
                StageArg::All => Stage::ALL.to_vec(),
            };
            for s in stages {
                for path in train_stage(&cfg, s)? {
                    println!("{}: wrote {}", s.name(), path.display());
                }
            }
        }
        Command::Eval { common, trials, policy } => {
            let cfg = load(&common)?;
            let p = match policy {
                Some(path) => CoDesignPolicy::load_json(&path)?,
                None => load_checkpoint(&cfg, checkpoint::CODESIGN, Stage::Synthesis)?,
            };
            let n = trials.trials.unwrap_or(cfg.episodes);
            let (summary, rows) = run_trials(&cfg, &p, "eval", cfg.plants, n)?;
            write_run(&cfg.out_dir.join("eval"), "eval", &cfg, "summary.csv", std::slice::from_ref(&summary), &rows)?;
            println!(
                "success {:.3} [{:.3}, {:.3}]  mean PDR {:.3}",
                summary.success_rate, summary.success_lo, summary.success_hi, summary.mean_pdr
            );
        }
        Command::Compare { common, trials } => {
            let cfg = load(&common)?;
            let n = trials.trials.unwrap_or(cfg.episodes);
            let (summary, rows) = compare_policies(&cfg, n)?;
            write_run(&cfg.out_dir.join("compare"), "compare", &cfg, "comparison.csv", &summary, &rows)?;
            for s in &summary {
                println!("{:<26} success {:.3}  mean PDR {:.3}", s.label, s.success_rate, s.mean_pdr);
            }
        }
        Command::Capacity { common, trials } => {
            let cfg = load(&common)?;
            let n = trials.trials.unwrap_or(cfg.episodes);
            let m_values = default_capacity_points(&cfg)?;
            println!("capacity bound N_cap = {}", cfg.network.capacity_bound()?);
            let (summary, rows) = capacity_sweep(&cfg, &m_values, n)?;
            write_run(&cfg.out_dir.join("capacity"), "capacity", &cfg, "capacity.csv", &summary, &rows)?;
            for s in &summary {
                println!("m={:<3} {:<11} success {:.3}  mean PDR {:.3}", s.plants, s.label, s.success_rate, s.mean_pdr);
            }
        }
        Command::SweepLambda { common } => {
            let cfg = load(&common)?;
            let with_est = load_checkpoint(&cfg, checkpoint::ESTIMATOR, Stage::Estimator)?;
            let no_est = CoDesignPolicy {
                estimator: Estimator::Passthrough,
                ..with_est.clone()
            };
            let (rows, sel) = sweep_both(&cfg, &with_est, &no_est)?;
            write_sweep_csv(&cfg.out_dir.join("lambda_sweep.csv"), &rows)?;
            for r in &rows {
                println!(
                    "{:<13} λ={:<4} success {:.3}  mean PDR {:.3}{}",
                    r.variant,
                    r.lambda,
                    r.success_rate,
                    r.mean_pdr,
                    if r.selected { "  *" } else { "" }
                );
            }
            println!("selected λ = {} (no estimator: {})", sel.lambda, sel.lambda_no_estimator);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
