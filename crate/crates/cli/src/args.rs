use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use covpath::path::Mode;

use crate::generate::GeneratorSpec;

/// Regularization paths for sparse inverse covariance estimation.
#[derive(Debug, Parser)]
#[command(name = "covpath", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Trace the regularization path for one covariance matrix.
    Solve(SolveArgs),
    /// Re-solve a saved path endpoint after perturbing its covariance.
    Online(OnlineArgs),
    /// Time path runs over a generated ensemble.
    Bench(BenchArgs),
    /// Re-check a solve output directory from its saved matrices.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Scaling,
    Predictor,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Scaling => Mode::Scaling,
            ModeArg::Predictor => Mode::Predictor,
        }
    }
}

impl ModeArg {
    pub fn as_str(self) -> &'static str {
        match self {
            ModeArg::Scaling => "scaling",
            ModeArg::Predictor => "predictor",
        }
    }
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("input").required(true).args(["sigma", "samples", "gen"])))]
pub struct SolveArgs {
    /// Covariance matrix as CSV.
    #[arg(long, value_name = "CSV")]
    pub sigma: Option<PathBuf>,

    /// Raw data as CSV, one observation per row.
    #[arg(long, value_name = "CSV")]
    pub samples: Option<PathBuf>,

    /// Generated instance, e.g. `n=30,density=0.1,seed=1`.
    #[arg(long, value_name = "SPEC")]
    pub gen: Option<GeneratorSpec>,

    /// Number of penalty values on the grid.
    #[arg(long, default_value_t = 50)]
    pub points: usize,

    /// Smallest penalty as a fraction of rho_max.
    #[arg(long, default_value_t = 0.01)]
    pub rho_min_frac: f64,

    /// Surrogate duality gap; sets the barrier weight t = gap / (2 n²).
    #[arg(long, default_value_t = 1e-3)]
    pub gap_target: f64,

    /// Warm start between grid points.
    #[arg(long, value_enum, default_value_t = ModeArg::Scaling)]
    pub mode: ModeArg,

    /// Entries of X below this fraction of max|X| count as zero.
    #[arg(long, default_value_t = 1e-4)]
    pub zero_tol: f64,

    /// Fraction of rows (largest scores first) visited per corrector sweep.
    #[arg(long, default_value_t = 1.0)]
    pub sweep_fraction: f64,

    /// Output directory.
    #[arg(long, default_value = "covpath-out")]
    pub output: PathBuf,

    /// Re-check every point (fresh residuals, duality, and a Newton oracle for n <= 30).
    #[arg(long)]
    pub verify: bool,

    /// Overrides the seed of `--gen`.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Also write U and X for every point under `matrices/`.
    #[arg(long)]
    pub write_matrices: bool,

    /// Corrector stopping tolerance on ‖H‖_F (default 1e-6 · n).
    #[arg(long)]
    pub residual_tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct OnlineArgs {
    /// State file written by `solve`.
    #[arg(long, value_name = "JSON")]
    pub state: PathBuf,

    /// Symmetric covariance perturbation C as CSV.
    #[arg(long, value_name = "CSV")]
    pub perturbation: PathBuf,

    /// Number of continuation steps.
    #[arg(long, default_value_t = 1)]
    pub k: usize,

    /// Output directory.
    #[arg(long, default_value = "covpath-online")]
    pub output: PathBuf,

    /// Compare against a from-scratch solve at the perturbed covariance.
    #[arg(long)]
    pub verify: bool,

    /// Corrector stopping tolerance on ‖H‖_F (default 1e-10 · n).
    #[arg(long)]
    pub residual_tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Problem dimensions.
    #[arg(long, value_delimiter = ',', default_values_t = vec![20, 50, 100, 200])]
    pub sizes: Vec<usize>,

    /// Path lengths.
    #[arg(long, value_delimiter = ',', default_values_t = vec![10, 50])]
    pub lengths: Vec<usize>,

    /// Instances per cell; seeds are `seed, seed + 1, ...`.
    #[arg(long, default_value_t = 3)]
    pub replicates: usize,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    #[arg(long, default_value_t = 0.1)]
    pub density: f64,

    #[arg(long, default_value_t = 1e-3)]
    pub gap_target: f64,

    /// Directory for `bench.json`; the table always goes to stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Directory written by `solve --write-matrices`.
    #[arg(long)]
    pub output: PathBuf,
}
