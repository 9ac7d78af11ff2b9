use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use poisson_deconv::Scenario;

mod commands;
mod config;

/// Deconvolution of Poisson intensities observed with uniform noise.
#[derive(Parser, Debug)]
#[command(name = "pdeconv", version, args_override_self = true)]
pub struct Cli {
    /// Read `key = value` defaults from FILE; flags on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Maximum number of worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Draw a noisy point set from a named scenario.
    Simulate(SimulateArgs),
    /// Estimate the intensity from a point file.
    Estimate(EstimateArgs),
    /// Run bandwidth selection and report the criterion.
    Select(SelectArgs),
    /// Monte Carlo comparison of tuning methods.
    Benchmark(BenchmarkArgs),
    /// Estimate intensities from interval data (e.g. BED peaks).
    Deconvolve(DeconvolveArgs),
}

#[derive(Args, Debug, Clone)]
pub struct KernelArgs {
    /// `epanechnikov`, or `order-L` for the polynomial kernel of order L.
    #[arg(long, default_value = "epanechnikov")]
    pub kernel: String,

    /// Evaluation points on [0, T] (default 512, or 2048 when T > 1).
    #[arg(long)]
    pub m: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct TuneArgs {
    /// Penalty margin for fixed-eta tuning.
    #[arg(long, allow_negative_numbers = true, default_value_t = poisson_deconv::selection::DEFAULT_ETA)]
    pub eta: f64,

    /// Penalty weight for adaptive tuning.
    #[arg(long, default_value_t = poisson_deconv::selection::DEFAULT_GAMMA)]
    pub gamma: f64,

    /// Number of eta values in [-0.95, 0.95] searched by adaptive tuning.
    #[arg(long, default_value_t = 21)]
    pub eta_points: usize,

    #[arg(long, value_enum, default_value_t = GridKind::Geometric)]
    pub grid: GridKind,

    /// Size of the geometric bandwidth grid.
    #[arg(long, default_value_t = poisson_deconv::selection::DEFAULT_GRID_POINTS)]
    pub grid_points: usize,

    /// `delta` of the theory grid `{1/D : ln n <= D <= delta n^(1/3)}`.
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    /// Geometric from (aT/n)^(1/3) to a/A.
    Geometric,
    /// Reciprocal integers.
    Theory,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tune {
    FixedEta,
    AdaptiveGamma,
}

#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    /// CSV with one observed point per row.
    #[arg(long)]
    pub points: PathBuf,

    /// Intensity scaling `n`.
    #[arg(long)]
    pub n: u64,

    /// Noise half-width.
    #[arg(long)]
    pub a: f64,

    /// Window end; the intensity is estimated on [0, T].
    #[arg(long = "T", default_value_t = 1.0)]
    pub t_end: f64,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, value_parser = parse_scenario)]
    pub scenario: Scenario,

    #[arg(long)]
    pub n: u64,

    #[arg(long)]
    pub a: f64,

    #[arg(long)]
    pub seed: u64,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Fixed bandwidth; must satisfy h <= a/A.
    #[arg(long, conflicts_with = "tune")]
    pub h: Option<f64>,

    /// Select the bandwidth first (the default when --h is absent).
    #[arg(long, value_enum)]
    pub tune: Option<Tune>,

    #[command(flatten)]
    pub tuning: TuneArgs,

    #[command(flatten)]
    pub kernel: KernelArgs,

    /// Replace negative values by zero in the written curve.
    #[arg(long)]
    pub clip_nonnegative: bool,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SelectArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[arg(long, value_enum, default_value_t = Tune::AdaptiveGamma)]
    pub tune: Tune,

    #[command(flatten)]
    pub tuning: TuneArgs,

    #[command(flatten)]
    pub kernel: KernelArgs,

    /// Write the full criterion table as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodKind {
    FixedEta,
    AdaptiveGamma,
    Oracle,
}

#[derive(Args, Debug)]
pub struct BenchmarkArgs {
    /// Run the full simulation grid: Beta scenarios with a in {0.05, 0.1},
    /// Laplace with a in {0.5, 1, 2, 3}, n in {500, 1000}, R = 30.
    #[arg(long, conflicts_with_all = ["scenario", "n", "a"])]
    pub paper_suite: bool,

    #[arg(long, value_delimiter = ',', value_parser = parse_scenario)]
    pub scenario: Vec<Scenario>,

    #[arg(long, value_delimiter = ',')]
    pub n: Vec<u64>,

    #[arg(long, value_delimiter = ',')]
    pub a: Vec<f64>,

    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "fixed-eta,adaptive-gamma,oracle"
    )]
    pub methods: Vec<MethodKind>,

    /// Eta values for the fixed-eta method.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_value = "-0.6")]
    pub eta: Vec<f64>,

    /// Also run fixed-eta at every value of the adaptive eta grid.
    #[arg(long)]
    pub eta_sweep: bool,

    #[arg(long, default_value_t = poisson_deconv::selection::DEFAULT_GAMMA)]
    pub gamma: f64,

    #[arg(long, default_value_t = 21)]
    pub eta_points: usize,

    #[arg(long, default_value_t = poisson_deconv::selection::DEFAULT_GRID_POINTS)]
    pub grid_points: usize,

    /// Replicates per scenario (default 30).
    #[arg(long = "R")]
    pub replicates: Option<usize>,

    #[arg(long)]
    pub seed: u64,

    /// JSON report.
    #[arg(long)]
    pub out: PathBuf,

    /// Write the median-risk replicate's curve of every scenario and method here.
    #[arg(long)]
    pub dump_curves: Option<PathBuf>,

    #[command(flatten)]
    pub kernel: KernelArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum AConvention {
    Half,
    Full,
}

#[derive(Args, Debug)]
pub struct DeconvolveArgs {
    /// Interval file: `chrom,start,end` or `start,end`, tab or comma separated.
    #[arg(long)]
    pub intervals: PathBuf,

    /// Only use intervals on this sequence.
    #[arg(long)]
    pub chrom: Option<String>,

    /// Divide all coordinates by this factor first.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,

    /// Window end after scaling (default: largest interval end).
    #[arg(long = "T")]
    pub t_end: Option<f64>,

    /// Intensity scaling `n` (default: the number of intervals on the sequence).
    #[arg(long)]
    pub n: Option<u64>,

    /// `a` is half the mean interval width (`half`) or the full mean width.
    #[arg(long, value_enum, default_value_t = AConvention::Half)]
    pub a_convention: AConvention,

    #[command(flatten)]
    pub tuning: TuneArgs,

    #[command(flatten)]
    pub kernel: KernelArgs,

    /// Replace negative values by zero in the written curves.
    #[arg(long)]
    pub clip_nonnegative: bool,

    /// Curve CSV. With several sequences, one file per sequence is written
    /// as `<stem>.<chrom>.csv`.
    #[arg(long)]
    pub out: PathBuf,

    /// Also write the kernel density of the midpoints, without deconvolution.
    #[arg(long)]
    pub naive: Option<PathBuf>,
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    s.parse().map_err(|e: poisson_deconv::Error| e.to_string())
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn fail(code: &str, message: &str) -> ExitCode {
    eprintln!("error[{code}]: {}", one_line(message));
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let args = match config::expand(std::env::args().collect()) {
        Ok(args) => args,
        Err(e) => return fail("config", &format!("{e:#}")),
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let msg = msg.lines().find(|l| !l.trim().is_empty()).unwrap_or("bad arguments");
            return fail("usage", msg.trim_start_matches("error: "));
        }
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            return fail("threads", &e.to_string());
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e
                .chain()
                .find_map(|c| c.downcast_ref::<poisson_deconv::Error>())
                .map_or("error", |e| e.code());
            fail(code, &format!("{e:#}"))
        }
    }
}
