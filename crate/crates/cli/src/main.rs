//! instrux: train, evaluate, and inspect instruction-following gridworld
//! agents.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use instrux::{cmd_eval, cmd_gradcheck, cmd_inspect, cmd_train_meta, cmd_train_skill, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "instrux", version, about = "Hierarchical instruction-execution agents on a 2D gridworld")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// TOML run config; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. --set env.height=6 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory for artifacts.
    #[arg(long, default_value = "runs/out")]
    out: PathBuf,
    /// Root seed override.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(self.config.as_deref(), &self.set)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train the parameterized skill (distillation then actor-critic).
    TrainSkill {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Train the meta controller against a frozen skill checkpoint.
    TrainMeta {
        #[command(flatten)]
        config: ConfigArgs,
        /// Stage: soft, soft-finetune, or hard-finetune.
        #[arg(long, default_value = "soft")]
        stage: String,
        /// Skill checkpoint to execute subtasks with.
        #[arg(long)]
        skill: PathBuf,
        /// Meta checkpoint to fine-tune from.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate scripted policies and optional learned agents.
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        skill: Option<PathBuf>,
        #[arg(long)]
        meta: Option<PathBuf>,
        /// Also run the hier-short / hier-long gate ablations.
        #[arg(long)]
        baselines: bool,
    },
    /// Finite-difference checks over every op kind and a soft meta step.
    Gradcheck {
        /// Number of random seeds per check.
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        /// Relative-error tolerance.
        #[arg(long, default_value_t = 1e-5)]
        tolerance: f64,
    },
    /// Print a checkpoint archive's entries and manifest.
    Inspect { path: PathBuf },
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::TrainSkill { config } => {
            let cfg = config.load()?;
            let ckpt = cmd_train_skill(&cfg, &config.out)?;
            println!("skill checkpoint written to {}", ckpt.display());
        }
        Command::TrainMeta { config, stage, skill, resume } => {
            let cfg = config.load()?;
            let ckpt = cmd_train_meta(&cfg, &stage, &skill, resume.as_deref(), &config.out)?;
            println!("meta checkpoint written to {}", ckpt.display());
        }
        Command::Eval { config, skill, meta, baselines } => {
            let cfg = config.load()?;
            let report = cmd_eval(&cfg, skill.as_deref(), meta.as_deref(), baselines, &config.out)?;
            print!("{}", report.to_table());
            println!("artifacts written to {}", config.out.display());
        }
        Command::Gradcheck { seeds, tolerance } => {
            let (pass, text) = cmd_gradcheck(seeds, tolerance)?;
            print!("{text}");
            if !pass {
                return Err(CliError::Other("gradient check failed".to_string()));
            }
        }
        Command::Inspect { path } => {
            print!("{}", cmd_inspect(&path)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
