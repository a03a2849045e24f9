//! Command-line front-end for the grf sampling library.
//!
//! Subcommands: `sample` (write realisations), `cov-error` (Monte-Carlo
//! maximal covariance error sweeps), `min-embed` (circulant embedding
//! padding search), `spde-compare` (averaged vs Neumann-oversampled FE
//! sampling). Exit codes: 0 success, 1 usage error, 2 numerical
//! infeasibility (e.g. a non-positive-definite embedding).

mod commands;
mod config;
mod output;

use clap::Parser;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "grf", version, about = "Gaussian random field sampling on regular grids")]
pub struct Cli {
    /// Plain-text key=value config file; flags override file values.
    #[arg(long, global = true)]
    pub config: Option<std::path::PathBuf>,

    #[command(subcommand)]
    pub command: commands::Command,
}

fn main() -> ExitCode {
    let args = match config::merge_config_args(std::env::args().collect()) {
        Ok(args) => args,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap's own help/version exits are successes
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(commands::CliError::Infeasible(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(commands::CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
