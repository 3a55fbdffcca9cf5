//! `stepgrid`: command-line driver for the footstep identification pipeline.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use stepgrid::Strategy;

#[derive(Debug, Parser)]
#[command(name = "stepgrid", version, about = "Footstep-based person identification from pressure-mat recordings")]
pub struct Cli {
    /// Seed for generation, mock embedding, training and fold assignment.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON run configuration; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory (or file, where the command writes a single file).
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset of PSQ recordings.
    Gen(GenArgs),
    /// Segment recordings into per-step PSQ files.
    Preprocess(PreprocessArgs),
    /// Render steps to PGM images with one strategy.
    Transform(TransformArgs),
    /// Compute descriptors for rendered images.
    Embed(EmbedArgs),
    /// Train one head on a descriptor directory.
    Train(TrainArgs),
    /// Cross-validate the full pipeline on a step directory.
    Eval(EvalArgs),
    /// Cross-validate the wavelet + SVM baseline on a step directory.
    Baseline(BaselineArgs),
    /// Summarize one or more report CSVs.
    Report(ReportArgs),
    /// Render one PSQ file to a PGM image.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 13)]
    pub subjects: usize,
    #[arg(long, default_value_t = 12)]
    pub seqs: usize,
    #[arg(long, default_value_t = 3)]
    pub steps: usize,
    #[arg(long, default_value_t = 120)]
    pub rows: usize,
    #[arg(long, default_value_t = 54)]
    pub cols: usize,
    /// Additive sensor noise standard deviation.
    #[arg(long, default_value_t = 0.02)]
    pub noise: f64,
    /// Emit subject pairs that differ only in the temporal order of each roll.
    #[arg(long)]
    pub twins: bool,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long = "in", value_name = "DIR")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub min_pixels: usize,
    #[arg(long, default_value_t = 2)]
    pub max_gap: usize,
    /// Pixel floor as a fraction of the recording maximum.
    #[arg(long, default_value_t = 0.1)]
    pub noise_floor: f64,
    /// Centering canvas as HEIGHTxWIDTH.
    #[arg(long, default_value = "64x32", value_parser = parse_canvas)]
    pub canvas: (usize, usize),
    /// Keep tight bounding-box crops instead of centering on a canvas.
    #[arg(long)]
    pub no_canvas: bool,
    /// Keep isolated active pixels.
    #[arg(long)]
    pub keep_specks: bool,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[arg(long = "in", value_name = "DIR")]
    pub input: PathBuf,
    #[arg(long, value_parser = parse_strategy)]
    pub strategy: Strategy,
    #[arg(long, default_value_t = 299)]
    pub size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EmbedderArg {
    Mock,
    Model,
}

#[derive(Debug, Args, Default)]
pub struct EmbedderArgs {
    #[arg(long, value_enum)]
    pub embedder: Option<EmbedderArg>,
    /// ONNX model file for `--embedder model`.
    #[arg(long, value_name = "PATH")]
    pub model: Option<PathBuf>,
    /// Descriptor length of the mock embedder.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Square input size expected by the embedder.
    #[arg(long)]
    pub size: Option<usize>,
    /// Graph node to read descriptors from.
    #[arg(long)]
    pub output_node: Option<String>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long = "in", value_name = "DIR")]
    pub input: PathBuf,
    #[command(flatten)]
    pub embedder: EmbedderArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ArchArg {
    Softmax,
    Gru,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Debug, Args, Default)]
pub struct TrainFlags {
    #[arg(long, value_enum)]
    pub arch: Option<ArchArg>,
    /// GRU hidden size.
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long, value_enum)]
    pub optimizer: Option<OptimizerArg>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long = "in", value_name = "DIR")]
    pub input: PathBuf,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GroupingArg {
    Step,
    Sequence,
}

#[derive(Debug, Args, Default)]
pub struct CvFlags {
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long, value_enum)]
    pub grouping: Option<GroupingArg>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long = "in", value_name = "DIR")]
    pub input: PathBuf,
    /// Comma-separated subset of max, avg, seq.
    #[arg(long, value_delimiter = ',', value_parser = parse_strategy)]
    pub strategies: Vec<Strategy>,
    #[command(flatten)]
    pub embedder: EmbedderArgs,
    #[command(flatten)]
    pub train: TrainFlags,
    #[command(flatten)]
    pub cv: CvFlags,
    /// Allow a head that does not match its strategy.
    #[arg(long)]
    pub force: bool,
    /// Write a checkpoint for every (strategy, repeat, fold).
    #[arg(long)]
    pub save_models: bool,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long = "in", value_name = "DIR")]
    pub input: PathBuf,
    #[command(flatten)]
    pub cv: CvFlags,
    /// SVM soft-margin constant.
    #[arg(long = "c", default_value_t = 1.0)]
    pub c_reg: f64,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report CSV files to merge.
    #[arg(long = "in", value_name = "CSV", required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long = "in", value_name = "PSQ")]
    pub input: PathBuf,
    /// Frame index to render.
    #[arg(long, conflicts_with = "strategy")]
    pub frame: Option<usize>,
    /// Render the max or average frame instead of a single index.
    #[arg(long, value_parser = parse_strategy)]
    pub strategy: Option<Strategy>,
    /// Square output size; native resolution when absent.
    #[arg(long)]
    pub size: Option<usize>,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_canvas(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s.split_once(['x', 'X']).ok_or("expected HEIGHTxWIDTH")?;
    let h = h.trim().parse::<usize>().map_err(|e| e.to_string())?;
    let w = w.trim().parse::<usize>().map_err(|e| e.to_string())?;
    if h == 0 || w == 0 {
        return Err("canvas dimensions must be positive".into());
    }
    Ok((h, w))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind().exit_code() as u8)
        }
    }
}
