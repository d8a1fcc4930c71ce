//! `gdrem` — simulate and analyze exponentially stable adaptive control
//! scenarios built on dynamic regressor extension and mixing.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gdrem_cli::commands;
use gdrem_cli::config::resolve_scenario;

#[derive(Parser)]
#[command(name = "gdrem", version, about = "Adaptive control simulation and trace analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Builtin experiment case (1, 2 or 3); mutually exclusive with --config.
    #[arg(long)]
    case: Option<u8>,
    /// TOML configuration file; mutually exclusive with --case.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Integration step override [s].
    #[arg(long)]
    dt: Option<f64>,
    /// Horizon override [s].
    #[arg(long)]
    t_final: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Reserved: runs are deterministic, no seed exists to disable.
    #[arg(long)]
    seedless: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario; write a trace CSV, a summary and plots.
    Run(ScenarioArgs),
    /// Excitation report (PE / s-PE classification) for an existing trace CSV.
    Analyze {
        /// Trace CSV produced by `run` or `compare`.
        #[arg(long)]
        trace: PathBuf,
        /// Window length T [s] for the Gram integrals.
        #[arg(long)]
        window: f64,
        /// Eigenvalue level threshold for the per-window rank.
        #[arg(long, default_value_t = 1e-6)]
        level: f64,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run one scenario under several estimators and summarize final errors.
    Compare {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Comma-separated estimator list, e.g. gdrem,gradient,rls,drem.
        #[arg(long, default_value = "gdrem,gradient,rls")]
        estimators: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => resolve_scenario(
            args.case,
            args.config.as_deref(),
            args.dt,
            args.t_final,
        )
        .and_then(|cfg| commands::run(&cfg, &args.out)),
        Command::Analyze {
            trace,
            window,
            level,
            out,
        } => commands::analyze(&trace, window, level, &out),
        Command::Compare {
            scenario,
            estimators,
        } => resolve_scenario(
            scenario.case,
            scenario.config.as_deref(),
            scenario.dt,
            scenario.t_final,
        )
        .and_then(|cfg| {
            let list = commands::parse_estimators(&estimators)?;
            commands::compare(&cfg, &list, &scenario.out)
        }),
    };
    match result {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
