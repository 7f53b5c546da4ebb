use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use torus_action::runner::{self, Command, Overrides};

/// Multi-periodic solutions of Poisson-gradient systems by action
/// minimization.
#[derive(Debug, Parser)]
#[command(name = "torus-action", version)]
struct Cli {
    /// solve | certify | check-grad | wirtinger | oracle-compare
    command: String,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; falls back to TORUS_ACTION_THREADS.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(command) = Command::parse(&cli.command) else {
        eprintln!("error: unknown command {:?}", cli.command);
        return ExitCode::from(runner::EXIT_ERROR as u8);
    };
    if let Err(e) = runner::configure_threads(cli.threads) {
        eprintln!("error: {e}");
        return ExitCode::from(runner::EXIT_ERROR as u8);
    }
    let overrides = Overrides {
        out: cli.out,
        seed: cli.seed,
    };
    ExitCode::from(runner::run(command, &cli.config, &overrides) as u8)
}
