//! `gssd`: single estimates, metric checks and sweeps from the command line.
//!
//! Exit status is 0 on success, 1 on runtime failure and 2 on usage errors.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use gssd::{Bandwidth, DivergenceKind, DivergenceSpec};

/// Gaussian-smoothed sliced divergences.
#[derive(Debug, Parser)]
#[command(name = "gssd", version)]
pub struct Cli {
    /// key=value file supplying flags not given on the command line
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Worker threads [default: available parallelism]
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the divergence between two datasets
    Estimate(EstimateArgs),
    /// Check symmetry, non-negativity, self-identity and the triangle inequality
    MetricCheck(MetricArgs),
    /// Estimate against sample size on equally distributed sets
    SweepSamples(SweepSamplesArgs),
    /// Sample-size sweeps for several dimensions
    SweepDim(SweepDimArgs),
    /// Estimate against the displacement of one Gaussian
    SweepDisplacement(SweepDisplacementArgs),
    /// Monte-Carlo error against the number of projections
    SweepProjections(SweepProjectionsArgs),
    /// Sample-size sweeps for several noise levels
    SweepNoise(SweepNoiseArgs),
}

#[derive(Debug, Args)]
pub struct EstimatorArgs {
    /// Base divergence(s): wasserstein, sinkhorn or mmd, comma separated
    #[arg(long, value_delimiter = ',', default_value = "wasserstein")]
    pub kind: Vec<DivergenceKind>,
    /// Power applied to the base divergence
    #[arg(long, default_value_t = DivergenceSpec::DEFAULT_P)]
    pub p: f64,
    /// Entropic regularization of the Sinkhorn base
    #[arg(long, default_value_t = DivergenceSpec::DEFAULT_LAMBDA)]
    pub lambda: f64,
    /// Marginal tolerance of the Sinkhorn solver
    #[arg(long, default_value_t = DivergenceSpec::DEFAULT_TOL)]
    pub sinkhorn_tol: f64,
    /// Iteration cap of the Sinkhorn solver
    #[arg(long, default_value_t = DivergenceSpec::DEFAULT_MAX_ITER)]
    pub sinkhorn_max_iter: usize,
    /// MMD kernel bandwidth: "mean" (pooled mean pairwise distance) or a number
    #[arg(long, default_value = "mean")]
    pub bandwidth: Bandwidth,
    /// Standard deviation of the smoothing noise
    #[arg(long, default_value_t = 3.0)]
    pub sigma: f64,
    /// Number of random projections
    #[arg(short = 'L', long = "projections", default_value_t = 50)]
    pub projections: usize,
    /// Master seed
    #[arg(long, env = "GSSD_SEED", default_value_t = 0)]
    pub seed: u64,
}

impl EstimatorArgs {
    pub fn specs(&self) -> Vec<DivergenceSpec> {
        self.kind
            .iter()
            .map(|&kind| DivergenceSpec {
                kind,
                p: self.p,
                sinkhorn_lambda: self.lambda,
                sinkhorn_tol: self.sinkhorn_tol,
                sinkhorn_max_iter: self.sinkhorn_max_iter,
                bandwidth: self.bandwidth,
            })
            .collect()
    }
}

/// Synthetic isotropic Gaussians `N(mean 1_d, scale^2 I)`, used when no CSV
/// is given.
#[derive(Debug, Args)]
pub struct SyntheticArgs {
    /// Samples per set [default: 500]
    #[arg(long)]
    pub n: Option<usize>,
    /// Dimension [default: 10, or 50 with --paper-scale]
    #[arg(long)]
    pub d: Option<usize>,
    /// Mean of every coordinate of the first set
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub mean_a: f64,
    /// Standard deviation of the first set
    #[arg(long, default_value_t = 1.0)]
    pub scale_a: f64,
    /// Mean of every coordinate of the second set
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub mean_b: f64,
    /// Standard deviation of the second set
    #[arg(long, default_value_t = 1.0)]
    pub scale_b: f64,
}

const SYNTHETIC: [&str; 6] = ["n", "d", "mean_a", "scale_a", "mean_b", "scale_b"];

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Two CSV files of samples, one row per sample
    #[arg(num_args = 0..=2, conflicts_with_all = SYNTHETIC)]
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[command(flatten)]
    pub synthetic: SyntheticArgs,
    /// Give both sets the same noise key, so identical inputs compare to 0
    #[arg(long)]
    pub shared_noise_key: bool,
}

#[derive(Debug, Args)]
pub struct MetricArgs {
    /// Two CSV files (the third set is their row-wise midpoint) or three
    #[arg(num_args = 0..=3, conflicts_with_all = SYNTHETIC)]
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[command(flatten)]
    pub synthetic: SyntheticArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Output CSV; metadata goes to the same path with extension .meta.json
    #[arg(short, long)]
    pub out: PathBuf,
    /// Replicates per grid point
    #[arg(long, default_value_t = 20)]
    pub replicates: usize,
    /// Fill the wall_time_ms column (makes outputs run-dependent)
    #[arg(long)]
    pub record_timings: bool,
    /// Full-size protocol: sample sizes up to 25000 and d = 50
    #[arg(long)]
    pub paper_scale: bool,
    /// One CSV (two disjoint draws per cell) or two CSVs
    #[arg(num_args = 0..=2, conflicts_with_all = SYNTHETIC)]
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[command(flatten)]
    pub synthetic: SyntheticArgs,
}

#[derive(Debug, Args)]
pub struct SweepSamplesArgs {
    #[command(flatten)]
    pub sweep: SweepArgs,
    /// Sample sizes [default: 64,128,...,4096, or up to 25000 with --paper-scale]
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct SweepDimArgs {
    #[command(flatten)]
    pub sweep: SweepArgs,
    /// Dimensions
    #[arg(long, value_delimiter = ',', default_value = "5,20,50")]
    pub grid: Vec<f64>,
    /// Sample sizes of every curve [default: 64,128,...,4096, or up to 25000 with --paper-scale]
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct SweepDisplacementArgs {
    #[command(flatten)]
    pub sweep: SweepArgs,
    /// Displacements s of the second mean s 1_d
    #[arg(
        long,
        value_delimiter = ',',
        allow_negative_numbers = true,
        default_value = "0,0.5,1,1.5,2,2.5,3,3.5,4"
    )]
    pub grid: Vec<f64>,
    /// Fixed mean of the first set
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    pub anchor: f64,
    /// Make the second set a translate of the first with the same noise key
    #[arg(long)]
    pub shared_noise_key: bool,
}

#[derive(Debug, Args)]
pub struct SweepProjectionsArgs {
    #[command(flatten)]
    pub sweep: SweepArgs,
    /// Projection counts
    #[arg(long, value_delimiter = ',', default_value = "10,50,250,1250")]
    pub grid: Vec<f64>,
    /// Projection count of the reference estimate
    #[arg(long, default_value_t = gssd::experiments::DEFAULT_REFERENCE_PROJECTIONS)]
    pub reference: usize,
}

#[derive(Debug, Args)]
pub struct SweepNoiseArgs {
    #[command(flatten)]
    pub sweep: SweepArgs,
    /// Noise levels
    #[arg(long, value_delimiter = ',', default_value = "0,1,3,5,15")]
    pub grid: Vec<f64>,
    /// Sample sizes of every curve [default: 64,128,...,4096, or up to 25000 with --paper-scale]
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<gssd::Error> for Failure {
    fn from(e: gssd::Error) -> Self {
        match e {
            gssd::Error::InvalidArgument(_) | gssd::Error::DimensionMismatch { .. } => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Runtime(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn parse_cli(argv: Vec<OsString>) -> Result<Cli, Failure> {
    let mut cmd = Cli::command();
    cmd.build();
    let matches = match cmd.clone().try_get_matches_from(&argv) {
        Ok(m) => m,
        Err(e) => e.exit(),
    };
    let Some(path) = matches.get_one::<PathBuf>("config").cloned() else {
        return Cli::from_arg_matches(&matches).map_err(|e| e.exit());
    };
    let mut argv = argv;
    argv.extend(config::overlay(&cmd, &matches, &path)?);
    let matches = match cmd.try_get_matches_from(&argv) {
        Ok(m) => m,
        Err(e) => e.exit(),
    };
    Cli::from_arg_matches(&matches).map_err(|e| e.exit())
}

fn run(argv: Vec<OsString>) -> Result<(), Failure> {
    let cli = parse_cli(argv)?;
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::Usage("--jobs must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::Runtime(e.into()))?;
    }
    match &cli.command {
        Command::Estimate(a) => commands::estimate(a),
        Command::MetricCheck(a) => commands::metric_check(a),
        Command::SweepSamples(a) => commands::sweep_samples(a),
        Command::SweepDim(a) => commands::sweep_dim(a),
        Command::SweepDisplacement(a) => commands::sweep_displacement(a),
        Command::SweepProjections(a) => commands::sweep_projections(a),
        Command::SweepNoise(a) => commands::sweep_noise(a),
    }
}

fn main() -> ExitCode {
    match run(std::env::args_os().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
