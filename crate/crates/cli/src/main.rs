mod commands;
mod output;
mod verify;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gup_bic::error::Error;
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "gup-bic", version, about = "Bound states of the fourth-order minimal-length Schrodinger equation")]
pub struct Cli {
    /// Configuration file (`key = value` lines); defaults to the reference well.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads for energy scans (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Relative tolerance of the reference integrations in `verify` and
    /// `momentum-check`.
    #[arg(long, global = true, default_value_t = 1e-11)]
    pub tol: f64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PotentialArg {
    Well,
    Linear,
    Harmonic,
    Custom,
}

impl PotentialArg {
    pub fn name(self) -> &'static str {
        match self {
            PotentialArg::Well => "well",
            PotentialArg::Linear => "linear",
            PotentialArg::Harmonic => "harmonic",
            PotentialArg::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Orthogonal,
    AsGiven,
}

#[derive(Args, Debug)]
pub struct Common {
    /// Override the configured potential.
    #[arg(long, value_enum)]
    pub potential: Option<PotentialArg>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Normalized degenerate states at one energy, sampled on a grid.
    Wavefunction {
        #[command(flatten)]
        common: Common,
        /// Energy in joules.
        #[arg(long = "E", conflicts_with = "k")]
        energy: Option<f64>,
        /// Special-energy index of the well (`E = E_k`).
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 401)]
        grid_n: usize,
        #[arg(long, value_enum, default_value = "orthogonal")]
        mode: ModeArg,
    },
    /// Degeneracy over an energy grid.
    DofScan {
        #[command(flatten)]
        common: Common,
        /// Lowest energy in joules (default: `e_max / n`).
        #[arg(long)]
        e_min: Option<f64>,
        #[arg(long, default_value_t = 2e-17)]
        e_max: f64,
        #[arg(long, default_value_t = 200)]
        n: usize,
    },
    /// Special energies of the well and standard levels.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 5)]
        k_max: usize,
        /// Upper limit for standard levels, joules.
        #[arg(long, default_value_t = 2e-17)]
        e_max: f64,
    },
    /// Observability ratio and critical beta.
    Observability {
        #[command(flatten)]
        common: Common,
        /// Evaluate the states at this energy (joules) as well.
        #[arg(long = "E")]
        energy: Option<f64>,
        #[arg(long, default_value_t = gup_bic::spectrum::OBSERVABILITY_THRESHOLD)]
        threshold: f64,
    },
    /// Momentum-representation solution space of the linear potential.
    MomentumCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long = "E", default_value_t = 3e-18)]
        energy: f64,
    },
    /// Run the verification checks and write `verify.json`.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Energy in joules for the state checks (default: a mid-range energy).
        #[arg(long = "E")]
        energy: Option<f64>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Wavefunction { .. } => "wavefunction",
            Command::DofScan { .. } => "dof-scan",
            Command::Spectrum { .. } => "spectrum",
            Command::Observability { .. } => "observability",
            Command::MomentumCheck { .. } => "momentum-check",
            Command::Verify { .. } => "verify",
        }
    }
}

#[derive(Debug)]
pub enum Failure {
    /// Bad flags or configuration.
    Input(String),
    Numerical(String),
    /// The command ran but a check failed; its report is already written.
    Verification(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verification(_) => 1,
            Failure::Input(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Verification(_) => "verification",
            Failure::Input(_) => "input",
            Failure::Numerical(_) => "numerical",
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Verification(m) | Failure::Input(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: &'a str,
    exit_code: u8,
}

fn report(f: &Failure) -> ExitCode {
    let r = ErrorReport { error: f.kind(), message: f.message(), exit_code: f.code() };
    eprintln!("{}", serde_json::to_string(&r).expect("serializable error"));
    ExitCode::from(f.code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            return report(&Failure::Input(e.render().to_string().trim().to_string()));
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(&f),
    }
}
