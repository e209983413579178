//! `edgesr`: degrade, train, infer and evaluate.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "edgesr", version, about = "Edge-informed single-image super-resolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command that touches the degradation or edge
/// pipeline. Unset values fall back to the config file, then to defaults.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Zoom factor: 2, 4 or 8.
    #[arg(long, value_parser = parse_scale)]
    pub scale: Option<edgesr::Scale>,
    /// TOML training config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Gaussian sigma for Canny edge detection.
    #[arg(long)]
    pub sigma_canny: Option<f64>,
    /// Gaussian sigma of the blur applied before subsampling (0 disables it).
    #[arg(long)]
    pub sigma_blur: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Blur and subsample every PNG in a directory.
    Degrade {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Train the edge stage, the image stage, or both.
    Train {
        #[command(flatten)]
        common: Common,
        /// Directory of HR training PNGs.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = StageArg::Both)]
        stage: StageArg,
        /// Stage-1 checkpoint for `--stage sr`, or a checkpoint to resume.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Continue the stage stored in `--checkpoint` instead of starting
        /// a new one.
        #[arg(long)]
        resume: bool,
        /// Override `max_steps` from the config.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Super-resolve one image.
    Infer {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// LR input PNG.
        #[arg(long)]
        input: PathBuf,
        /// Output prefix; writes `<prefix>_sr.png` and `<prefix>_edges.png`.
        #[arg(long)]
        out: PathBuf,
        /// Also write `<prefix>_bicubic.png` and `<prefix>_nearest.png`.
        #[arg(long)]
        baselines: bool,
    },
    /// Score predictions (or a classical baseline) against ground truth.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Ground-truth HR PNGs.
        #[arg(long)]
        gt: PathBuf,
        /// Predicted PNGs paired by file stem (`<stem>.png` or `<stem>_sr.png`).
        #[arg(long, conflicts_with = "method", required_unless_present = "method")]
        pred: Option<PathBuf>,
        /// Compute a classical baseline from degraded ground truth instead.
        #[arg(long, value_enum)]
        method: Option<BaselineArg>,
        /// Predicted edge maps (`<stem>.png` or `<stem>_edges.png`); adds
        /// precision and recall against Canny edges of the ground truth.
        #[arg(long)]
        edges: Option<PathBuf>,
        /// Dataset name used to look up published reference rows.
        #[arg(long)]
        dataset: Option<String>,
        /// Report prefix; writes `<out>.csv` and `<out>.txt`.
        #[arg(long, default_value = "evaluation")]
        out: PathBuf,
    },
    /// Write randomly initialized VGG-19 feature weights for desk-scale runs.
    InitExtractor {
        #[arg(long)]
        out: PathBuf,
        /// Divide every VGG-19 layer width by this factor.
        #[arg(long, default_value_t = 1)]
        width_divisor: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageArg {
    Edge,
    Sr,
    Both,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineArg {
    Bicubic,
    Nearest,
}

fn parse_scale(s: &str) -> Result<edgesr::Scale, String> {
    let n: usize = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    edgesr::Scale::new(n).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Degrade { common, input, output } => commands::degrade(&common, &input, &output),
        Command::Train {
            common,
            data,
            stage,
            checkpoint,
            resume,
            steps,
        } => commands::train(&common, &data, stage, checkpoint.as_deref(), resume, steps),
        Command::Infer {
            common,
            checkpoint,
            input,
            out,
            baselines,
        } => commands::infer(&common, &checkpoint, &input, &out, baselines),
        Command::Evaluate {
            common,
            gt,
            pred,
            method,
            edges,
            dataset,
            out,
        } => commands::evaluate(&common, &gt, pred.as_deref(), method, edges.as_deref(), dataset, &out),
        Command::InitExtractor {
            out,
            width_divisor,
            seed,
        } => commands::init_extractor(&out, width_divisor, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
