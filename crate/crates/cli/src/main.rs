use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cgb_cli::commands::{self, Overrides};
use cgb_cli::{CliError, CliResult};

/// Corruption-tolerant Gaussian-process bandit experiments.
#[derive(Parser)]
#[command(name = "cgb", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment and write traces, aggregate and manifest.
    Run(RunArgs),
    /// Run with the invariant checks enabled; exits 4 on any violation.
    Audit(RunArgs),
    /// Write the Newton-basis selection log of the configured kernel and domain.
    Newton(RunArgs),
    /// Plot aggregate CSVs (one series per file) as an SVG.
    Plot {
        /// Aggregate CSV files.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Output SVG path.
        #[arg(long, default_value = "regret.svg")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn threads_from_env() -> CliResult<Option<usize>> {
    match std::env::var("CGB_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::Config(format!("CGB_THREADS: `{v}` is not a positive integer"))),
        },
        Err(_) => Ok(None),
    }
}

fn overrides(a: RunArgs) -> CliResult<(PathBuf, Overrides)> {
    let ov = Overrides {
        out: a.out,
        trials: a.trials,
        seed: a.seed,
        threads: threads_from_env()?,
    };
    Ok((a.config, ov))
}

fn dispatch(cli: Cli) -> CliResult<commands::Written> {
    match cli.command {
        Command::Run(a) => {
            let (cfg, ov) = overrides(a)?;
            commands::run(&cfg, &ov)
        }
        Command::Audit(a) => {
            let (cfg, ov) = overrides(a)?;
            commands::audit(&cfg, &ov)
        }
        Command::Newton(a) => {
            let (cfg, ov) = overrides(a)?;
            commands::newton(&cfg, &ov)
        }
        Command::Plot { inputs, out } => commands::plot(&inputs, &out),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(w) => {
            for f in &w.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("cgb: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
