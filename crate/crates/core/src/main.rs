use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use loadshape::experiment::{self, ExperimentConfig, Profile};
use loadshape::Result;

#[derive(Parser)]
#[command(name = "loadshape", version, about = "Battery load shaping against NILM attackers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config layered over the profile preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = ["desk", "paper"])]
    profile: Option<String>,
    /// Output directory (overrides `paths.output`).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let profile = self.profile.as_deref().map(str::parse::<Profile>).transpose()?;
        let mut cfg = ExperimentConfig::load(self.config.as_deref(), profile)?;
        if let Some(s) = self.seed {
            cfg.apply_seed(s);
        }
        if let Some(o) = &self.out {
            cfg.paths.output = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write seeded synthetic household days as wide CSVs.
    GenSynthetic(Common),
    /// Train one Seq2Point attacker per appliance.
    TrainNilm(Common),
    /// Train the load-shaping agent for one privacy weight.
    TrainAgent {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lambda: f64,
    },
    /// Evaluate a trained agent (or the no-op baseline) against the attackers.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, required_unless_present = "baseline")]
        lambda: Option<f64>,
        /// Evaluate the raw demand instead of an agent.
        #[arg(long, conflicts_with = "lambda")]
        baseline: bool,
    },
    /// Full pipeline for every configured seed and λ, then the report.
    Sweep(Common),
    /// Summarize every results.json under the output directory.
    Report(Common),
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenSynthetic(c) => {
            for p in experiment::cmd_gen_synthetic(&c.load()?)? {
                println!("{}", p.display());
            }
        }
        Command::TrainNilm(c) => {
            for p in experiment::cmd_train_nilm(&c.load()?)? {
                println!("{}", p.display());
            }
        }
        Command::TrainAgent { common, lambda } => {
            for p in experiment::cmd_train_agent(&common.load()?, lambda)? {
                println!("{}", p.display());
            }
        }
        Command::Evaluate { common, lambda, .. } => {
            let r = experiment::cmd_evaluate(&common.load()?, lambda)?;
            println!("{}", serde_json::to_string_pretty(&r)?);
        }
        Command::Sweep(c) => {
            let report = experiment::cmd_sweep(&c.load()?)?;
            print!("{}", report.to_markdown());
        }
        Command::Report(c) => {
            let report = experiment::cmd_report(&c.load()?.paths.output)?;
            print!("{}", report.to_markdown());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
