//! `hme`: assembly, hyperbolicity analysis, scans, property checks and 1D
//! simulation of hyperbolic moment systems.
//!
//! Exit codes: 0 success, 2 invalid input or output path, 3 numerical
//! failure (eigensolver, CFL, invalid state after a step, failed check).

mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hme_core::hyperbolicity::ScanTarget;

use commands::{AssembleArgs, CheckArgs, Common, EigArgs, EigTarget, ScanArgs, SimulateArgs, Which};
use error::CliResult;

#[derive(Parser)]
#[command(name = "hme", version, about = "Globally hyperbolic moment systems: assembly, analysis and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScanTargetArg {
    Grad,
    Regularized,
}

impl From<ScanTargetArg> for ScanTarget {
    fn from(t: ScanTargetArg) -> Self {
        match t {
            ScanTargetArg::Grad => ScanTarget::Grad,
            ScanTargetArg::Regularized => ScanTarget::Regularized,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a coefficient matrix (or the whole system) of a state.
    Assemble {
        /// State JSON: 1D, 13-moment or multi-dimensional.
        state: PathBuf,
        #[arg(long, value_enum, default_value = "system")]
        which: Which,
        /// BGK relaxation time of the source.
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        /// Collision constant of the 13-moment source.
        #[arg(long, default_value_t = 1.0)]
        chi: f64,
        /// Molecule mass of the 13-moment source.
        #[arg(long = "mg", default_value_t = 1.0)]
        m_g: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Eigen-analysis of a coefficient matrix with the closed-form speeds.
    Eig {
        state: PathBuf,
        #[arg(long, value_enum, default_value = "regularized")]
        target: EigTarget,
        /// Direction `n1,n2,n3` for 13-moment states.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        direction: Option<Vec<f64>>,
        #[command(flatten)]
        common: Common,
    },
    /// Hyperbolicity map over normalized `(f_{M-1}, f_M)`.
    Scan {
        config: Option<PathBuf>,
        #[arg(long = "order")]
        order: Option<usize>,
        #[arg(long, value_enum)]
        target: Option<ScanTargetArg>,
        #[command(flatten)]
        common: Common,
    },
    /// Property suite of the 13-moment system on random states.
    Check13 {
        config: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Hyperbolicity conditions of the multi-dimensional systems.
    Checknd {
        config: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the 1D finite-volume solver; `--out` names the output directory.
    Simulate {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Assemble {
            state,
            which,
            tau,
            chi,
            m_g,
            common,
        } => commands::assemble(&AssembleArgs {
            state,
            which,
            tau,
            chi,
            m_g,
            common,
        }),
        Command::Eig {
            state,
            target,
            direction,
            common,
        } => commands::eig(&EigArgs {
            state,
            target,
            direction,
            common,
        }),
        Command::Scan {
            config,
            order,
            target,
            common,
        } => commands::scan(&ScanArgs {
            config,
            order,
            target: target.map(Into::into),
            common,
        }),
        Command::Check13 { config, common } => commands::check13(&CheckArgs { config, common }),
        Command::Checknd { config, common } => commands::checknd(&CheckArgs { config, common }),
        Command::Simulate { config, common } => commands::simulate(&SimulateArgs { config, common }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hme: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
