use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use zeno_core::cli::{run, Command, RunOptions};

/// Survival, effective decay rates and Zeno/inverse-Zeno transitions of an
/// unstable level coupled to a continuum.
#[derive(Parser)]
#[command(name = "zeno", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Survival amplitude and probability on a time grid (survival.csv).
    Survival(Common),
    /// Effective decay rate against measurement interval (rate.csv).
    Rate(Common),
    /// Transition time and existence diagnostics (transition.json).
    Transition(Common),
    /// Rate curves and transitions over a list of omega_a/bandwidth ratios.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides [output] dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Recompute sweep entries even when cached results exist.
    #[arg(long)]
    no_cache: bool,
    /// Absolute accuracy target of spectral amplitudes.
    #[arg(long)]
    tolerance: Option<f64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Survival(a) => (Command::Survival, a),
        Cmd::Rate(a) => (Command::Rate, a),
        Cmd::Transition(a) => (Command::Transition, a),
        Cmd::Sweep(a) => (Command::Sweep, a),
    };
    let opts = RunOptions {
        out: args.out,
        no_cache: args.no_cache,
        tolerance: args.tolerance,
    };
    match run(command, &args.config, &opts) {
        Ok(summary) => {
            for f in &summary.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
