//! The `stostab` command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 every
//! path diverged, 4 a verification check failed.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "stostab", version, about = "Stochastic stabilization of the Brockett integrator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate the closed loop and write trajectories plus an ensemble summary.
    Simulate(SimulateArgs),
    /// Scan the closed-loop generator of V2 over a grid.
    ScanLv(ScanArgs),
    /// Check the diffusion design conditions and the small control property.
    CheckDesign(DesignArgs),
    /// Piecewise-linear noise convergence for dx = x o dw.
    WongZakai(WongZakaiArgs),
    /// Rank of the Lie bracket matrix at random points.
    Controllability(ControllabilityArgs),
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Default, Clone)]
pub struct CommonArgs {
    /// Flat `key = value` file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub n_paths: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub dt: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub horizon: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub b1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub b2: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub b3: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub b4: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub k1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub k2: Option<f64>,
    /// Initial state `v1,v2,v3` (a single value for wong-zakai).
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    /// Diffusion design: `eigen` (default) or `constant`.
    #[arg(long)]
    pub design: Option<String>,
    /// Constant design value for B1.
    #[arg(long, allow_negative_numbers = true)]
    pub c1: Option<f64>,
    /// Constant design value for B2.
    #[arg(long, allow_negative_numbers = true)]
    pub c2: Option<f64>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct GridArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub grid_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub grid_max: Option<f64>,
    /// Points per axis.
    #[arg(long)]
    pub grid_count: Option<usize>,
    /// Radius of the excluded ball around the origin.
    #[arg(long)]
    pub exclusion: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Keep every k-th step in the trajectory files.
    #[arg(long)]
    pub thin: Option<usize>,
    /// Stability tube radius.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub conv_threshold: Option<f64>,
    /// Level for the sup V2 exceedance estimate (default 10 V2(x0)).
    #[arg(long)]
    pub m_level: Option<f64>,
    /// Time buckets for the V2 drift estimate.
    #[arg(long)]
    pub buckets: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct ScanArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Also scan the full 3-D grid besides the x2 = 0 slice.
    #[arg(long)]
    pub full: Option<bool>,
}

#[derive(Args, Debug, Clone)]
pub struct DesignArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Random directions per radius in the small control scan.
    #[arg(long)]
    pub n_dirs: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct WongZakaiArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated knot counts, ascending.
    #[arg(long)]
    pub meshes: Option<String>,
    #[arg(long)]
    pub n_real: Option<usize>,
    #[arg(long)]
    pub fine_steps: Option<usize>,
    #[arg(long)]
    pub substeps: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct ControllabilityArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub n_points: Option<usize>,
    /// Points are drawn uniformly from `[-range, range]^3`.
    #[arg(long)]
    pub range: Option<f64>,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) | Error::Config(_) | Error::InvalidDesign { .. } => EXIT_CONFIG,
        Error::Diverged { .. } => EXIT_DIVERGED,
        Error::Io(_) => EXIT_IO,
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::ScanLv(a) => commands::scan_lv(&a),
        Command::CheckDesign(a) => commands::check_design(&a),
        Command::WongZakai(a) => commands::wong_zakai(&a),
        Command::Controllability(a) => commands::controllability(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
