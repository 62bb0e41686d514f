//! `stackcomm`: scenario files in, JSON and CSV reports out.
//!
//! Exit codes: 0 success, 1 validation error, 2 numerical failure.

mod commands;
mod fail;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::fail::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RateUnits {
    Bits,
    Nats,
}

impl RateUnits {
    pub fn to_bits(self, v: f64) -> f64 {
        match self {
            RateUnits::Bits => v,
            RateUnits::Nats => stackcomm::strategic_rd::nats_to_bits(v),
        }
    }

    pub fn from_bits(self, v: f64) -> f64 {
        match self {
            RateUnits::Bits => v,
            RateUnits::Nats => stackcomm::strategic_rd::bits_to_nats(v),
        }
    }

    pub fn column(self) -> &'static str {
        match self {
            RateUnits::Bits => "rate_bits",
            RateUnits::Nats => "rate_nats",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RateUnits::Bits => "bits",
            RateUnits::Nats => "nats",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "stackcomm", version, about = "Solvers for hierarchical strategic communication games")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scenario JSON file.
    #[arg(long, global = true, value_name = "PATH")]
    pub scenario: Option<PathBuf>,

    /// Report destination; stdout when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Master seed for every random draw; overrides `sim.seed`.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,

    /// Monte Carlo sample count; overrides `sim.n`.
    #[arg(long, global = true, value_name = "N")]
    pub samples: Option<usize>,

    /// Units for rates read from scenarios and flags and written to reports.
    #[arg(long, global = true, value_enum, default_value = "bits")]
    pub rate_units: RateUnits,
}

/// Grid bounds shared by the sweeping commands.
#[derive(Debug, Clone, Copy, Args)]
pub struct Grid {
    #[arg(long, allow_negative_numbers = true)]
    pub lo: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub hi: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Panel {
    Fig3a,
    Fig3b,
    Fig3c,
    Custom,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the scenario and write a JSON report.
    Solve {
        /// Also write the drawn samples as CSV (`X,theta[,W]`).
        #[arg(long, value_name = "PATH")]
        samples_out: Option<PathBuf>,
    },
    /// Write a panel or scenario sweep as CSV.
    Sweep {
        #[arg(value_enum)]
        panel: Panel,
        #[command(flatten)]
        grid: Grid,
        /// ρ for fig3a, r for fig3b.
        #[arg(long, allow_negative_numbers = true)]
        fixed: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        sigma_x2: f64,
        /// Also write a gnuplot script for the CSV.
        #[arg(long, value_name = "PATH")]
        gnuplot: Option<PathBuf>,
    },
    /// Run the acceptance battery and write a JSON summary.
    Verify {
        #[arg(long, conflicts_with = "full")]
        quick: bool,
        #[arg(long)]
        full: bool,
    },
    /// Strategic rate-distortion sweep as CSV.
    Rd {
        #[command(flatten)]
        grid: Grid,
    },
    /// Matched-ρ_XW root (JSON), or a sweep over ρ_XW (CSV) when --points is given.
    SiMatch {
        #[command(flatten)]
        grid: Grid,
        /// Residual tolerance for calling a point matched.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Classify the scenario objectives and solve them when canonical.
    ControlCheck,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
