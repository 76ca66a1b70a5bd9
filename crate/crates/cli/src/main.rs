use std::path::PathBuf;

use clap::{Parser, Subcommand};

use slagflow::commands::{cmd_run, cmd_sweep, cmd_verify};
use slagflow::suites::SuiteKind;

#[derive(Parser)]
#[command(
    name = "slagflow",
    about = "Graphical Lagrangian mean curvature flow: runs, verification suites, and sweeps"
)]
struct Cli {
    /// Root directory for all artifacts; run directories are resolved
    /// relative to it.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configured flow to completion and persist its artifacts.
    Run {
        /// Experiment configuration file.
        config: PathBuf,
    },
    /// Run a verification suite and report measured values per check.
    Verify {
        #[arg(value_enum)]
        suite: SuiteKind,
    },
    /// Rerun one configuration across a list of values of one parameter.
    Sweep {
        /// Experiment configuration file used as the template.
        config: PathBuf,
        /// Parameter to vary: epsilon, amplitude, resolution, or kappa.
        #[arg(long)]
        param: String,
        /// Comma-separated parameter values, one run each.
        #[arg(long)]
        values: String,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config } => cmd_run(&config, &cli.out),
        Command::Verify { suite } => cmd_verify(suite),
        Command::Sweep {
            config,
            param,
            values,
        } => cmd_sweep(&config, &param, &values, &cli.out),
    };
    std::process::exit(code);
}
