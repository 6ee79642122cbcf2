//! `reebchord`: consecutive collision orbits of the planar circular restricted
//! three-body problem from the command line.
//!
//! Exit codes: 0 success with findings, 2 usage or input error, 3 clean run
//! with an empty result, 4 numerical failure.

mod commands;
mod config;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{JacobiArg, Range, StateArg};

/// An input problem detected by the CLI itself.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(
    name = "reebchord",
    version,
    about = "Consecutive collision orbits of the PCR3BP via Moser regularization"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Relative integration tolerance.
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub rel_tol: f64,
    /// Absolute integration tolerance.
    #[arg(long, global = true, default_value_t = 1e-12)]
    pub abs_tol: f64,
    /// Integration horizon (regularized time for the regularized flow).
    #[arg(long = "tmax", global = true, default_value_t = 50.0)]
    pub t_max: f64,
    /// Largest pericenter index searched.
    #[arg(long = "kmax", global = true, default_value_t = 3)]
    pub k_max: usize,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Machine-readable output on stdout.
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BranchSel {
    Plus,
    Minus,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SideSel {
    Negative,
    Positive,
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lagrange points and the first critical value.
    Lagrange {
        #[arg(long, allow_hyphen_values = true)]
        mu: f64,
    },
    /// Scan axis shots, refine chords and write the catalog.
    Scan {
        #[arg(long, allow_hyphen_values = true)]
        mu: f64,
        /// Jacobi energy, or `auto-X` for first critical value minus X.
        #[arg(long, allow_hyphen_values = true)]
        jacobi: JacobiArg,
        #[arg(long, value_enum, default_value_t = BranchSel::Both)]
        branch: BranchSel,
        #[arg(long, value_enum, default_value_t = SideSel::Both)]
        side: SideSel,
        /// Scan range `lo:hi` on one side of O.
        #[arg(long, allow_hyphen_values = true)]
        s_range: Option<Range>,
        #[arg(long, default_value_t = reebchord::search::DEFAULT_GRID)]
        grid: usize,
        /// Run at or above the first critical value (needs --s-range).
        #[arg(long)]
        force: bool,
        /// Catalog path (JSON lines).
        #[arg(long, default_value = "catalog.jsonl")]
        out: PathBuf,
    },
    /// Integrate one trajectory and write it as CSV.
    Integrate {
        #[arg(long, allow_hyphen_values = true)]
        mu: f64,
        /// Initial state `q1,q2,p1,p2`.
        #[arg(long, allow_hyphen_values = true, conflicts_with = "shot")]
        state: Option<StateArg>,
        /// Axis shot start `s` (with --jacobi and --branch).
        #[arg(long, allow_hyphen_values = true)]
        shot: Option<f64>,
        #[arg(long, value_enum, default_value_t = BranchSel::Minus)]
        branch: BranchSel,
        /// Jacobi energy; defaults to H of the initial state.
        #[arg(long, allow_hyphen_values = true)]
        jacobi: Option<JacobiArg>,
        /// Integrate the regularized flow through collisions.
        #[arg(long)]
        regularized: bool,
        /// CSV path (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check fiberwise star-shapedness on a grid of rays.
    Starshape {
        #[arg(long, allow_hyphen_values = true)]
        mu: f64,
        #[arg(long, allow_hyphen_values = true)]
        jacobi: JacobiArg,
        #[arg(long, default_value_t = 60)]
        base_grid: usize,
        #[arg(long, default_value_t = 60)]
        ray_grid: usize,
        /// Report path (JSON).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw a catalog chord as SVG.
    OrbitSvg {
        #[arg(long)]
        catalog: PathBuf,
        /// Zero-based entry index.
        #[arg(long)]
        index: usize,
        #[arg(long)]
        out: PathBuf,
        /// Samples per half chord.
        #[arg(long, default_value_t = 600)]
        samples: usize,
    },
    /// Kinetic energy gained by a burn: dv^2/2 + v dv.
    Oberth {
        #[arg(long, allow_hyphen_values = true)]
        v: f64,
        #[arg(long, allow_hyphen_values = true)]
        dv: f64,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use reebchord::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::InvalidParameter(_)
                | E::AboveCritical { .. }
                | E::Forbidden { .. }
                | E::OutsideHill { .. }
                | E::UseRegularized { .. }
                | E::AtCollision
                | E::PoleTransition
                | E::Io(_)
                | E::Json(_) => 2,
                _ => 4,
            };
        }
        if cause.downcast_ref::<UsageError>().is_some()
            || cause.downcast_ref::<std::io::Error>().is_some()
            || cause.downcast_ref::<serde_json::Error>().is_some()
        {
            return 2;
        }
    }
    4
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
