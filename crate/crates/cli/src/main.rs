//! `stixelflow`: generate synthetic data, fit and query stixel ensembles,
//! render occurrence maps, simulate spot clusters and compare costs.

mod fit;
mod render;
mod report;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "stixelflow", version, about = "Stixel ensemble species-distribution pipeline")]
struct Cli {
    /// Base seed for every random draw.
    #[arg(long, global = true, env = "STIXELFLOW_SEED", default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic observation CSV and the world description it came from.
    Generate(GenerateArgs),
    /// Fit a stixel ensemble, checkpointing every stixel task.
    Fit(FitArgs),
    /// Predict occurrence on a regular lat/lon grid.
    Predict(PredictArgs),
    /// Render one week of a prediction table as a plain PGM image.
    Render(RenderArgs),
    /// Run a fit on a simulated spot-market cluster and bill it.
    Simulate(SimulateArgs),
    /// Compare deployment profiles for a workload.
    Report(ReportArgs),
    /// Overall improvement when a fraction of the work is sped up.
    Amdahl(AmdahlArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 20_000)]
    pub n_obs: usize,
    /// Covariate dimension.
    #[arg(long, default_value_t = 8)]
    pub dim: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Where to write the world description; defaults to world.cfg next to --out.
    #[arg(long)]
    pub world_out: Option<PathBuf>,
    #[arg(long, default_value = "wood_thrush")]
    pub species: String,
    /// Domain as lat_min,lat_max,lon_min,lon_max.
    #[arg(long)]
    pub bbox: Option<String>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub obs: PathBuf,
    /// TOML file with [stixel], [domain], [learner] and [duration] tables.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Local workers; the fitted ensemble does not depend on this.
    #[arg(long, default_value_t = 4)]
    pub workers: usize,
    /// Species to fit; defaults to the species of the first observation.
    #[arg(long)]
    pub species: Option<String>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub ensemble: PathBuf,
    /// World description supplying covariates at each grid point.
    #[arg(long)]
    pub world: PathBuf,
    /// Grid spacing in degrees.
    #[arg(long)]
    pub grid_res: f64,
    /// Week or inclusive range `A..B`.
    #[arg(long, default_value = "1..52")]
    pub weeks: String,
    /// Prediction box as lat_min,lat_max,lon_min,lon_max; defaults to the ensemble domain.
    #[arg(long)]
    pub bbox: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub preds: PathBuf,
    #[arg(long)]
    pub week: u32,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Price trace CSV (t_seconds,price).
    #[arg(long, conflicts_with = "trace_params")]
    pub trace: Option<PathBuf>,
    /// Synthetic trace parameters as key=value pairs separated by commas.
    #[arg(long)]
    pub trace_params: Option<String>,
    /// Bid in USD per instance-hour.
    #[arg(long)]
    pub bid: f64,
    /// Fleet as key=value pairs: spot, dedicated, cores, on_demand, fee, boot.
    #[arg(long, default_value = "")]
    pub fleet: String,
    /// Observation CSV whose stixel tasks form the workload.
    #[arg(long)]
    pub tasks_from: PathBuf,
    /// Optional fit configuration (same format as `fit --config`).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scale task durations so a failure-free run costs this many core-hours.
    #[arg(long)]
    pub core_hours: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Profiles CSV; defaults to the built-in case-study profiles.
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    #[arg(long, default_value_t = stixelflow::cost::DEFAULT_CORE_HOURS_PER_SPECIES)]
    pub core_hours: f64,
    #[arg(long, default_value_t = 1)]
    pub n_species: u64,
    /// Compare regions by their cheapest profile instead of profiles.
    #[arg(long)]
    pub by_region: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AmdahlArgs {
    #[arg(long)]
    pub fraction: f64,
    #[arg(long)]
    pub factor: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => fit::generate(a, cli.seed),
        Command::Fit(a) => fit::fit(a, cli.seed),
        Command::Predict(a) => fit::predict(a),
        Command::Render(a) => render::render(a),
        Command::Simulate(a) => simulate::simulate(a, cli.seed),
        Command::Report(a) => report::report(a),
        Command::Amdahl(a) => report::amdahl(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
