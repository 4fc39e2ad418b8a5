use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use palmfbm::spectrum::SpectrumMethod;
use palmfbm::{ConfigKind, FbmMode, HurstIndex};

#[derive(Debug, Parser)]
#[command(name = "palmfbm", version, about = "Hyperuniform point processes from the fBm-perturbed lattice")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample one perturbed lattice configuration.
    Sample(SampleArgs),
    /// Monte Carlo number variance over a radius grid, with a log-log fit.
    Variance(VarianceArgs),
    /// Structure factor on a t grid.
    Spectrum(SpectrumArgs),
    /// Mixing functional V_{a,b}(t) and its decay verdict.
    Mixing(MixingArgs),
    /// Refit a variance table.
    Regress(RegressArgs),
    /// Render CSV outputs as a log-log SVG.
    Plot(PlotArgs),
}

pub fn parse_hurst(s: &str) -> Result<HurstIndex, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    HurstIndex::new(v).map_err(|_| format!("h must lie in the open interval (0, 1), got {v}"))
}

#[derive(Debug, Args)]
pub struct Common {
    /// Master seed; every random stream is derived from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (affects wall time only).
    #[arg(long)]
    pub threads: Option<usize>,
    /// File of `key=value` lines; explicit flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long, value_parser = parse_hurst)]
    pub h: HurstIndex,
    /// Number of lattice steps (even); the output has n + 1 points.
    #[arg(long, default_value_t = 65_536)]
    pub n: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// `palm` keeps the origin; `stationarized` applies a uniform shift.
    #[arg(long, default_value = "palm")]
    pub mode: ConfigKind,
    /// Shift half-width for stationarized mode (default n/8).
    #[arg(long)]
    pub shift: Option<f64>,
    #[arg(long, default_value = "two-sided")]
    pub fbm_mode: FbmMode,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct VarianceArgs {
    #[arg(long, value_parser = parse_hurst)]
    pub h: HurstIndex,
    #[arg(long, default_value_t = 65_536)]
    pub n: usize,
    #[arg(long, default_value_t = 2000)]
    pub realizations: usize,
    #[arg(long, default_value_t = 16.0)]
    pub rmin: f64,
    /// Largest radius (default n/16).
    #[arg(long)]
    pub rmax: Option<f64>,
    #[arg(long, default_value_t = 24)]
    pub nr: usize,
    #[arg(long, default_value = "palm")]
    pub mode: ConfigKind,
    #[arg(long)]
    pub shift: Option<f64>,
    /// Bootstrap resamples for the variance standard errors.
    #[arg(long, default_value_t = 200)]
    pub bootstrap: usize,
    #[arg(long, default_value = "two-sided")]
    pub fbm_mode: FbmMode,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long, value_parser = parse_hurst)]
    pub h: HurstIndex,
    #[arg(long, default_value = "sum")]
    pub mode: SpectrumMethod,
    /// Explicit t values (comma separated); overrides the grid flags.
    #[arg(long, value_delimiter = ',')]
    pub t: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.1)]
    pub tmin: f64,
    #[arg(long, default_value_t = 3.0)]
    pub tmax: f64,
    /// Grid size for the analytic modes; empirical mode uses the dual grid.
    #[arg(long, default_value_t = 30)]
    pub nt: usize,
    #[arg(long, default_value_t = palmfbm::spectrum::DEFAULT_TOLERANCE)]
    pub tol: f64,
    /// Empirical mode: lattice steps per configuration.
    #[arg(long, default_value_t = 4096)]
    pub n: usize,
    /// Empirical mode: number of configurations.
    #[arg(long, default_value_t = 2000)]
    pub realizations: usize,
    /// Empirical mode: window length L (default n/2).
    #[arg(long)]
    pub window: Option<f64>,
    /// Empirical mode: accept t off the dual grid 2πk/L.
    #[arg(long)]
    pub allow_off_grid: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct MixingArgs {
    #[arg(long, value_parser = parse_hurst)]
    pub h: HurstIndex,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub a: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub b: f64,
    #[arg(long, default_value_t = 1.0)]
    pub tmin: f64,
    #[arg(long, default_value_t = 1000.0)]
    pub tmax: f64,
    #[arg(long, default_value_t = 200)]
    pub nt: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct RegressArgs {
    /// Variance table CSV.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Weight points by inverse delta-method variance of ln Var.
    #[arg(long)]
    pub weighted: bool,
    /// JSON output; printed to standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// One or more CSVs (variance, spectrum or mixing).
    #[arg(long = "in", required = true, num_args = 1.., value_delimiter = ',')]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Self::Sample(a) => &a.common,
            Self::Variance(a) => &a.common,
            Self::Spectrum(a) => &a.common,
            Self::Mixing(a) => &a.common,
            Self::Regress(a) => &a.common,
            Self::Plot(a) => &a.common,
        }
    }
}
