//! The `tablelogic` command line. [`Cli`] is the clap definition and
//! [`execute`] runs a parsed command; every command that writes files also
//! writes a [`RunManifest`] next to its primary output.

mod commands;
mod convert;
mod manifest;

use std::ops::RangeInclusive;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::execute;
pub use convert::{markup_to_table, SLOT_PX};
pub use manifest::{blob_hash, digest_inputs, manifest_path, InputDigest, RunManifest};

/// Environment variable naming the directory for outputs whose `--out` was
/// omitted.
pub const OUT_DIR_ENV: &str = "TABLELOGIC_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "tablelogic", version, about = "Table structure recognition by logical-location regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic NDJSON corpus.
    Generate(GenerateArgs),
    /// Pre-train an encoder on word-pair logical distances.
    Pretrain(PretrainArgs),
    /// Train the cascade regressor from scratch.
    Train(TrainArgs),
    /// Train starting from a pre-trained encoder checkpoint.
    Finetune(FinetuneArgs),
    /// Predict logical locations for every table in a dataset.
    Predict(PredictArgs),
    /// Score predicted tables against ground truth.
    Eval(EvalArgs),
    /// Convert between table JSON, markup and adjacency triplets.
    Convert(ConvertArgs),
    /// Check tables for structural errors.
    Validate(ValidateArgs),
    /// Run the objective/architecture ablation matrix over several seeds.
    Ablate(AblateArgs),
    /// Re-run a command from its manifest.
    Replay(ReplayArgs),
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once("..").unwrap_or((s, s));
    let a: usize = a.trim().parse().map_err(|_| format!("bad range start in '{s}'"))?;
    let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| format!("bad range end in '{s}'"))?;
    if a == 0 || a > b {
        return Err(format!("range '{s}' must be non-empty and start at 1 or more"));
    }
    Ok((a, b))
}

fn parse_probability(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    const OK: RangeInclusive<f64> = 0.0..=1.0;
    if !OK.contains(&p) || p == 1.0 {
        return Err(format!("{p} is not in [0, 1)"));
    }
    Ok(p)
}

fn parse_size(s: &str) -> Result<(f64, f64), String> {
    let (w, h) = s.split_once('x').ok_or_else(|| format!("expected WIDTHxHEIGHT, got '{s}'"))?;
    let w: f64 = w.parse().map_err(|_| format!("bad width in '{s}'"))?;
    let h: f64 = h.parse().map_err(|_| format!("bad height in '{s}'"))?;
    if !(w > 0.0 && h > 0.0) {
        return Err(format!("image size '{s}' must be positive"));
    }
    Ok((w, h))
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Row count range, e.g. `2..8` (inclusive).
    #[arg(long, value_parser = parse_range, default_value = "2..8")]
    pub rows: (usize, usize),
    #[arg(long, value_parser = parse_range, default_value = "2..8")]
    pub cols: (usize, usize),
    #[arg(long, value_parser = parse_probability, default_value_t = 0.1)]
    pub span_prob: f64,
    #[arg(long, default_value_t = 3)]
    pub max_span: usize,
    /// Detection noise in pixels.
    #[arg(long, default_value_t = 2.0)]
    pub jitter: f64,
    #[arg(long, value_parser = parse_size, default_value = "512x512")]
    pub image: (f64, f64),
    #[arg(long, value_parser = parse_range, default_value = "1..3")]
    pub words: (usize, usize),
    /// Upper bound on labelled word pairs per record.
    #[arg(long, default_value_t = 256)]
    pub max_pairs: usize,
    #[arg(long)]
    pub count: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InterArg {
    Ordered,
    Literal,
}

/// Model and optimizer flags shared by the training commands.
#[derive(Debug, Args, Clone)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 64)]
    pub d: usize,
    #[arg(long, default_value_t = 4)]
    pub heads: usize,
    /// Feed-forward width; defaults to 2·d.
    #[arg(long)]
    pub ff: Option<usize>,
    /// Attention layers per regressor.
    #[arg(long, default_value_t = 3)]
    pub layers: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    /// Tables per optimizer step.
    #[arg(long, default_value_t = 1)]
    pub batch: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Held-out set evaluated after every epoch.
    #[arg(long)]
    pub heldout: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Objective/architecture row: 1a, 1b, 1c, 1d or 2b.
    #[arg(long)]
    pub ablation: Option<String>,
    #[arg(long, value_enum, default_value_t = InterArg::Ordered)]
    pub inter_variant: InterArg,
    /// Extra corner noise redrawn each epoch, in pixels.
    #[arg(long, default_value_t = 0.0)]
    pub augment: f64,
    /// Weights file to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-epoch metrics NDJSON; defaults to `<out>.metrics.ndjson`.
    #[arg(long)]
    pub metrics_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    /// Pre-trained encoder checkpoint.
    #[arg(long)]
    pub init_from: PathBuf,
    #[command(flatten)]
    pub train: TrainArgs,
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Fraction of steps spent in linear warm-up.
    #[arg(long, default_value_t = 0.05)]
    pub warmup: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Detection,
    Adjacency,
    Logical,
    Teds,
    Bleu,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Restrict the report to these metric families.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub metric: Vec<MetricArg>,
    #[arg(long, default_value_t = crate::metrics::DEFAULT_IOU_THRESHOLD)]
    pub iou: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConvertTarget {
    Markup,
    Adjacency,
    Json,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// Table NDJSON, or one markup string per line.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub to: ConvertTarget,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// JSON report of violations per record.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub heldout: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub seeds: Vec<u64>,
    /// Rows to run; all five by default.
    #[arg(long, value_delimiter = ',')]
    pub rows: Vec<String>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}
