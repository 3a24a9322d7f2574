//! Command-line surface. Every command is also serde-serializable so a run
//! can be recorded in its manifest and replayed later.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "stefan", version, about = "Logistic Stefan problems with sign-changing growth rates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Integrate one problem and write its trajectory.
    Simulate(SimulateArgs),
    /// Principal eigenvalue on (0, ell).
    Eigen(EigenArgs),
    /// Critical length h* for a given diffusion rate.
    CriticalLength(CriticalLengthArgs),
    /// Critical diffusion d* for a given interval length.
    CriticalDiffusion(CriticalDiffusionArgs),
    /// Positive equilibrium on an interval or on the half line.
    Stationary(StationaryArgs),
    /// Semi-wave speed k0 or, with --k, the profile w_k.
    Semiwave(SemiwaveArgs),
    /// Decide spreading or vanishing for one problem.
    Classify(ClassifyArgs),
    /// Threshold expansion rate mu* by bisection.
    MuStar(MuStarArgs),
    /// Fitted asymptotic front speed.
    Speed(SpeedArgs),
    /// Classify a batch of problems.
    Sweep(SweepArgs),
    /// Run the bundled invariant checks.
    Selftest(SelftestArgs),
    /// Replay a run recorded in a manifest.
    Rerun(RerunArgs),
}

/// Where results go. Without `--out`, print-style commands only write to stdout.
#[derive(Debug, Clone, Args, Serialize, Deserialize, Default)]
pub struct OutArgs {
    /// Output directory (created atomically).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replace an existing output directory.
    #[arg(long)]
    #[serde(default)]
    pub force: bool,
}

/// A problem file plus optional overrides.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SpecArgs {
    /// Problem specification (JSON).
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub d: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    /// New front position; the initial samples are stretched onto [0, h0].
    #[arg(long)]
    pub h0: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
}

/// Growth rate and boundary operator for the eigen-type commands.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ProfileArgs {
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Growth profile (JSON).
    #[arg(long, conflicts_with = "m_const")]
    pub m_file: Option<PathBuf>,
    /// Constant growth rate.
    #[arg(long)]
    pub m_const: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long)]
    pub t_end: f64,
    /// Interior resolution of the front-fixed grid.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 1e-2)]
    pub dt_max: f64,
    #[arg(long, default_value_t = 0.1)]
    pub sample_interval: f64,
    /// Profile snapshot times (default: 0 and t_end).
    #[arg(long, value_delimiter = ',')]
    pub snapshots: Option<Vec<f64>>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    #[serde(default)]
    pub force: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
pub struct EigenArgs {
    #[arg(long)]
    pub ell: f64,
    #[arg(long)]
    pub d: f64,
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[arg(long, default_value_t = 256)]
    pub grid_n: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
pub struct CriticalLengthArgs {
    #[arg(long)]
    pub d: f64,
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[arg(long, default_value_t = 256)]
    pub grid_n: usize,
    /// Longest interval probed.
    #[arg(long, default_value_t = 100.0)]
    pub ell_max: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
pub struct CriticalDiffusionArgs {
    #[arg(long)]
    pub h0: f64,
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[arg(long, default_value_t = 256)]
    pub grid_n: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
pub struct StationaryArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Solve on (0, ell) with u(ell) = 0.
    #[arg(long, required_unless_present = "halfline", conflicts_with = "halfline")]
    pub ell: Option<f64>,
    /// Solve on the half line by exhaustion.
    #[arg(long)]
    #[serde(default)]
    pub halfline: bool,
    /// Nodes for the interval solve (default: 32 per unit length, at least 256).
    #[arg(long)]
    pub grid_n: Option<usize>,
    /// Number of truncations in the doubling schedule.
    #[arg(long, default_value_t = 4)]
    pub truncations: usize,
    /// Tail-report window `lo,hi` (default: the last quarter of the observation window).
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub tail_window: Option<Vec<f64>>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    #[serde(default)]
    pub force: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
pub struct SemiwaveArgs {
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub c: f64,
    #[arg(long)]
    pub d: f64,
    /// Emit the profile for this speed instead of solving for k0.
    #[arg(long, required_unless_present = "mu")]
    pub k: Option<f64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long, default_value_t = 50.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
pub struct MuStarArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long, default_value_t = 1e-4)]
    pub mu_lo: f64,
    #[arg(long, default_value_t = 1e3)]
    pub mu_hi: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub tol_mu: f64,
    #[arg(long, default_value_t = 50.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
pub struct SpeedArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    #[arg(long, default_value_t = 200.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    /// Trailing fraction of the trajectory used for the fit.
    #[arg(long, default_value_t = 0.5)]
    pub fraction: f64,
    /// Band widening around the semi-wave speed bounds.
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Far-field growth levels `m1,m2` for the band (default: read off the profile).
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub levels: Option<Vec<f64>>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
pub struct SweepArgs {
    /// JSON array of problem specifications.
    #[arg(long)]
    pub specs: PathBuf,
    #[arg(long, default_value_t = 50.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Concurrent runs (default: available cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    #[serde(default)]
    pub force: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SelftestArgs {
    /// Seed for the randomized checks.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RerunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory for the replay (default: print only).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(default)]
    pub force: bool,
}
