//! `satsr`: degrade imagery, train and apply RFSR models, score
//! super-resolution and detections, and prepare datasets.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

/// Process exit codes.
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_INTERNAL: u8 = 4;

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "satsr",
    version,
    about = "Satellite imagery super-resolution and detection scoring"
)]
pub struct Cli {
    /// Seed for every random choice in the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "SATSR_THREADS")]
    pub threads: Option<usize>,

    /// Log filter: error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Simulate a coarser sensor from native-resolution imagery.
    Degrade(DegradeArgs),
    /// Train an RFSR model.
    SrTrain(SrTrainArgs),
    /// Super-resolve images with a trained model.
    SrApply(SrApplyArgs),
    /// Score bicubic and RFSR reconstructions with PSNR and SSIM.
    SrEval(SrEvalArgs),
    /// Score detections against ground truth.
    DetEval(DetEvalArgs),
    /// Tile imagery and split image ids into train and test sets.
    Dataset(DatasetArgs),
    /// Time RFSR inference on one image.
    Bench(BenchArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct DegradeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Native GSD in cm; defaults to the image sidecar, then 30.
    #[arg(long)]
    pub native_gsd: Option<f64>,
    /// Target GSD in cm.
    #[arg(
        long,
        required_unless_present = "ladder",
        conflicts_with = "ladder",
        requires = "out"
    )]
    pub out_gsd: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the full 60/120/240/480 cm ladder.
    #[arg(long, requires = "out_dir")]
    pub ladder: bool,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SrTrainArgs {
    /// HR training images or directories of them.
    #[arg(long, num_args = 1.., required_unless_present = "synthetic")]
    pub hr: Vec<PathBuf>,
    /// Train on this many generated 128x128 scenes instead of files.
    #[arg(long, conflicts_with = "hr")]
    pub synthetic: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub scale: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub n_estimators: usize,
    #[arg(long, default_value_t = 12)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 200)]
    pub min_samples_split: usize,
    #[arg(long, default_value_t = 8)]
    pub features_per_split: usize,
    #[arg(long, default_value_t = 0.10)]
    pub sample_rate: f64,
    #[arg(long)]
    pub no_bootstrap: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SrApplyArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// LR image or directory.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output image, or directory when the input is a directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SrEvalArgs {
    /// One model per enhancement level.
    #[arg(long, num_args = 1.., required = true)]
    pub model: Vec<PathBuf>,
    /// HR test images or directories.
    #[arg(long, num_args = 1.., required = true)]
    pub hr: Vec<PathBuf>,
    /// GSD of the HR images in cm.
    #[arg(long, default_value_t = 30.0)]
    pub gsd: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct DetEvalArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub dets: PathBuf,
    /// Report from a baseline run to compare against.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    #[arg(long, default_value = "model")]
    pub model: String,
    #[arg(long, default_value = "data")]
    pub data: String,
    #[arg(long, default_value_t = 30.0)]
    pub gsd: f64,
    #[arg(long, default_value_t = satsr_core::deteval::MATCH_IOU)]
    pub match_iou: f64,
    #[arg(long, default_value_t = satsr_core::deteval::NMS_IOU)]
    pub nms_iou: f64,
    #[arg(long, default_value_t = satsr_core::deteval::N_BOOTSTRAP)]
    pub bootstrap: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct DatasetArgs {
    /// Directory of images; each file name is its image id.
    #[arg(long)]
    pub images: PathBuf,
    /// Ground-truth CSV or GeoJSON labels.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, default_value_t = satsr_core::datasetio::DEFAULT_TRAIN_RATIO)]
    pub ratio: f64,
    /// Tile side in pixels; omit to only split.
    #[arg(long)]
    pub tile: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub overlap: usize,
    #[arg(long, default_value_t = satsr_core::datasetio::DEFAULT_MIN_RETAINED)]
    pub min_retained: f64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// LR input; defaults to a generated 544x544 scene.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(satsr_core::Error),
    Internal(String),
}

impl From<satsr_core::Error> for CliError {
    fn from(e: satsr_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use satsr_core::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(E::Io { .. }) | CliError::Internal(_) => EXIT_INTERNAL,
            CliError::Core(_) => EXIT_DATA,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Internal(m) => write!(f, "internal: {m}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = cli.log_level.parse().unwrap_or(log::LevelFilter::Warn);
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();

    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("satsr: internal: {e}");
            return ExitCode::from(EXIT_INTERNAL);
        }
    }

    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("satsr: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
