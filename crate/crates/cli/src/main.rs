//! Command-line entry point.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use mpdbm_cli::commands::{cmd_eval, cmd_inspect, cmd_oracle_check, cmd_train};

#[derive(Parser)]
#[command(name = "mpdbm", version, about = "Train and query deep Boltzmann machines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model; writes metrics and a checkpoint into --out.
    Train {
        /// JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Continue from a checkpoint directory.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Run an evaluation suite against a checkpoint.
    Eval {
        /// JSON run configuration (shape, data, and eval sections).
        #[arg(long)]
        config: PathBuf,
        /// Checkpoint directory to evaluate.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Output directory for metrics (created if missing).
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify gradients, inference, sampling, and centering against
    /// exact enumeration on a tiny model.
    OracleCheck {
        /// Optional config supplying the shape and seed to check.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Validate a checkpoint and print its summary.
    Inspect {
        /// Checkpoint directory.
        checkpoint: PathBuf,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match &cli.command {
        Command::Train {
            config,
            seed,
            out,
            resume,
        } => cmd_train(config, *seed, out, resume.as_deref()),
        Command::Eval {
            config,
            checkpoint,
            out,
        } => cmd_eval(config, checkpoint, out),
        Command::OracleCheck { config } => cmd_oracle_check(config.as_deref()),
        Command::Inspect { checkpoint } => cmd_inspect(checkpoint),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
