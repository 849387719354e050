//! `risknet` command-line front end.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use risknet::prob_risk::{VelocitySource, WeightPreset};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] risknet::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numeric() => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "risknet", version, about = "Interaction-field driving risk toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON run configuration; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Column override `key=column`, repeatable.
    #[arg(long = "schema", value_name = "KEY=COL")]
    pub schema: Vec<String>,
    /// Frame rate of the track CSV, Hz.
    #[arg(long)]
    pub frame_rate: Option<f64>,
    /// CSV positions are bounding-box corners.
    #[arg(long)]
    pub bbox_corner: bool,
}

/// Where forecasts for the probabilistic modes come from.
#[derive(Debug, Clone, Args)]
pub struct Forecast {
    /// Fuse forecasts into expected risk instead of using the recorded frame.
    #[arg(long)]
    pub probabilistic: bool,
    /// Trained model manifest.
    #[arg(long, conflicts_with = "replay")]
    pub model: Option<PathBuf>,
    /// Use the recorded future as a single certain mode.
    #[arg(long)]
    pub replay: bool,
    #[arg(long, value_enum)]
    pub velocity: Option<VelocityArg>,
    #[arg(long, value_enum)]
    pub weights: Option<WeightArg>,
    /// Replace the reduced mass by 1 kg in the predicted energy.
    #[arg(long)]
    pub unit_mass: bool,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum VelocityArg {
    FiniteDifference,
    ModeState,
}

impl From<VelocityArg> for VelocitySource {
    fn from(v: VelocityArg) -> Self {
        match v {
            VelocityArg::FiniteDifference => VelocitySource::FiniteDifference,
            VelocityArg::ModeState => VelocitySource::ModeState,
        }
    }
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum WeightArg {
    Uniform,
    ExpDecay,
}

impl From<WeightArg> for WeightPreset {
    fn from(w: WeightArg) -> Self {
        match w {
            WeightArg::Uniform => WeightPreset::Uniform,
            WeightArg::ExpDecay => WeightPreset::ExpDecay,
        }
    }
}

/// Predictor hyperparameter overrides.
#[derive(Debug, Clone, Args)]
pub struct HyperFlags {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub modes: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub history: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Model step period, s.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Risk time series for the ego: per frame, or over the forecast horizon
    /// with --probabilistic.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Track CSV, or `archetype:<name>`.
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        ego_id: u64,
        /// Prediction time for --probabilistic.
        #[arg(long)]
        frame: Option<i64>,
        #[command(flatten)]
        forecast: Forecast,
        /// CSV output; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Risk raster for one frame.
    Map {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scenario: String,
        /// Probe with the ego's state (and drop the ego as a source);
        /// otherwise a stationary car probes the field.
        #[arg(long)]
        ego_id: Option<u64>,
        #[arg(long)]
        frame: i64,
        /// Cell edge, meters.
        #[arg(long, default_value_t = 1.0)]
        cell: f64,
        /// `xmin,ymin,xmax,ymax`; defaults to the scenario extent.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        bounds: Option<Vec<f64>>,
        #[arg(long)]
        binary: bool,
        /// Forecast step for --probabilistic.
        #[arg(long, default_value_t = 1)]
        step: usize,
        #[command(flatten)]
        forecast: Forecast,
        /// Output stem; writes `<stem>.json` and `<stem>.csv` or `<stem>.bin`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Baseline metrics next to the directional field, plus first detections.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        ego_id: u64,
        /// Detection threshold `metric=value` (ttc, thw, rss, nc_field,
        /// risknet); `inf` disables a metric. Repeatable.
        #[arg(long = "threshold", value_name = "METRIC=VALUE")]
        thresholds: Vec<String>,
        /// Percentile for the relative detection rule.
        #[arg(long, default_value_t = 90.0)]
        percentile: f64,
        /// Comparison CSV; a `<stem>.json` summary is written next to it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the trajectory predictor.
    Train {
        #[command(flatten)]
        common: Common,
        /// Track CSV or directory of track CSVs.
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        hyper: HyperFlags,
        /// Model manifest path; the payload and `loss.csv` go next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Mixture forecast for one agent.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        scenario: String,
        /// Agent to forecast.
        #[arg(long)]
        ego_id: u64,
        #[arg(long)]
        frame: i64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Prediction metrics over every complete window of a scenario.
    Metrics {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        scenario: String,
        /// Restrict to windows of this agent.
        #[arg(long)]
        ego_id: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate scenarios.
    Gen {
        #[command(subcommand)]
        what: GenCommand,
    },
}

#[derive(Debug, Subcommand)]
enum GenCommand {
    /// A long-tail archetype scenario.
    Archetype {
        #[command(flatten)]
        common: Common,
        /// blocked_lane_change, lateral_cut_in or rear_overtake_cut_in.
        name: String,
        /// Parameter override `name=value`, repeatable.
        #[arg(long = "param", value_name = "NAME=VALUE")]
        params: Vec<String>,
        /// Sampling rate, Hz.
        #[arg(long)]
        rate: Option<f64>,
        /// Length, s.
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Isolated constant-velocity and constant-turn tracks for training.
    Corpus {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 200)]
        tracks: usize,
        #[command(flatten)]
        hyper: HyperFlags,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    use commands as c;
    match cli.command {
        Command::Eval {
            common,
            scenario,
            ego_id,
            frame,
            forecast,
            out,
        } => c::eval(&common, &scenario, ego_id, frame, &forecast, out.as_deref()),
        Command::Map {
            common,
            scenario,
            ego_id,
            frame,
            cell,
            bounds,
            binary,
            step,
            forecast,
            out,
        } => c::map(
            &common,
            &c::MapArgs {
                scenario,
                ego_id,
                frame,
                cell,
                bounds,
                binary,
                step,
            },
            &forecast,
            &out,
        ),
        Command::Compare {
            common,
            scenario,
            ego_id,
            thresholds,
            percentile,
            out,
        } => c::compare(&common, &scenario, ego_id, &thresholds, percentile, out.as_deref()),
        Command::Train {
            common,
            dataset,
            hyper,
            out,
        } => c::train(&common, &dataset, &hyper, &out),
        Command::Predict {
            common,
            model,
            scenario,
            ego_id,
            frame,
            out,
        } => c::predict(&common, &model, &scenario, ego_id, frame, out.as_deref()),
        Command::Metrics {
            common,
            model,
            scenario,
            ego_id,
            out,
        } => c::metrics(&common, &model, &scenario, ego_id, out.as_deref()),
        Command::Gen { what } => match what {
            GenCommand::Archetype {
                common,
                name,
                params,
                rate,
                duration,
                out,
            } => c::gen_archetype(&common, &name, &params, rate, duration, &out),
            GenCommand::Corpus {
                common,
                tracks,
                hyper,
                out,
            } => c::gen_corpus(&common, tracks, &hyper, &out),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
