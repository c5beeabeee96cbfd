use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use deadoil_cli::{run, Command, RunArgs};

/// Forward solves, adjoint gradients and optimal control runs from a
/// scenario config.
#[derive(Debug, Parser)]
#[command(name = "deadoil", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Scenario config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Save every k-th time level; overrides `output.stride`.
    #[arg(long)]
    stride: Option<usize>,
    /// Seed for random directions; overrides `gradcheck.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let args = RunArgs {
        command: cli.command,
        config: cli.config,
        out: cli.out,
        stride: cli.stride,
        seed: cli.seed,
    };
    match run(&args) {
        Ok(summary) => {
            println!(
                "{}: {} ({})",
                args.command.name(),
                summary.status,
                summary.manifest.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
