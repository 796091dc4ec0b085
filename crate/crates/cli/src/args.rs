use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use fsmix_core::eval::{PolyphonyMode, SnrFilter};
use fsmix_core::fewshot::{AttentionMode, Method};
use fsmix_core::scene::DataSplit;

/// Soundscape generation and few-shot continual-learning evaluation.
///
/// Every flag can also be set through an `FSMIX_*` environment variable
/// (shown in each flag's help). All outputs land under `--run-dir`, which
/// also holds `artifacts.json` listing what each stage wrote.
#[derive(Debug, Parser)]
#[command(name = "fsmix", version, propagate_version = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Serialize)]
pub struct Global {
    /// Run directory for all outputs
    #[arg(long, global = true, env = "FSMIX_RUN_DIR", default_value = "run")]
    pub run_dir: PathBuf,
    /// Worker threads; 0 uses every core. Results do not depend on it
    #[arg(long, global = true, env = "FSMIX_JOBS", default_value_t = 0)]
    pub jobs: usize,
    /// Log level (error, warn, info, debug, trace)
    #[arg(long, global = true, env = "FSMIX_LOG", default_value = "warn")]
    pub log: String,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a source manifest (or synthesize one) and split its classes
    PrepSources(PrepSources),
    /// Render strongly labeled soundscapes for one data split
    GenSed(GenSed),
    /// Cut labeled 1 s clips around every event of a scene set
    ExtractClips(ExtractClips),
    /// Embed clips with the pooled log-mel embedder
    Featurize(Featurize),
    /// Train the base cosine classifier
    TrainBase(TrainBase),
    /// Train the few-shot weight generator episodically
    TrainDfsl(TrainDfsl),
    /// Run the repeated few-shot evaluation protocol
    Eval(Eval),
    /// Collect evaluation reports into one comparison table
    Report(Report),
    /// Generate a synthetic embedding world (all five stores)
    SynthWorld(SynthWorld),
}

#[derive(Debug, Args, Serialize)]
pub struct PrepSources {
    /// Source manifest CSV (file_path,class_label,duration_s); omit with --synthetic
    #[arg(long, env = "FSMIX_MANIFEST", required_unless_present = "synthetic")]
    pub manifest: Option<PathBuf>,
    /// Generate a synthetic tonal source corpus instead of reading a manifest
    #[arg(long, env = "FSMIX_SYNTHETIC", conflicts_with = "manifest")]
    pub synthetic: bool,
    /// Classes in the synthetic corpus
    #[arg(long, env = "FSMIX_SYNTHETIC_CLASSES", default_value_t = 30)]
    pub synthetic_classes: usize,
    /// Clips per class in the synthetic corpus
    #[arg(long, env = "FSMIX_SYNTHETIC_CLIPS", default_value_t = 24)]
    pub synthetic_clips: usize,
    /// Number of base classes
    #[arg(long, env = "FSMIX_BASE_CLASSES", default_value_t = 59)]
    pub base_classes: usize,
    /// Number of novel-val classes
    #[arg(long, env = "FSMIX_NOVEL_VAL_CLASSES", default_value_t = 15)]
    pub novel_val_classes: usize,
    /// Number of novel-test classes
    #[arg(long, env = "FSMIX_NOVEL_TEST_CLASSES", default_value_t = 15)]
    pub novel_test_classes: usize,
    /// Minimum source clips for a class to be eligible
    #[arg(long, env = "FSMIX_MIN_CLIPS", default_value_t = 20)]
    pub min_clips: usize,
    /// Base clip ratio train:val:test
    #[arg(long, env = "FSMIX_BASE_RATIO", default_value = "5:1:2")]
    pub base_ratio: String,
    #[arg(long, env = "FSMIX_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct GenSed {
    /// Validated manifest (default: <run-dir>/sources/manifest.csv)
    #[arg(long, env = "FSMIX_MANIFEST")]
    pub manifest: Option<PathBuf>,
    /// Class/clip split (default: <run-dir>/sources/split.json, or computed from the manifest)
    #[arg(long, env = "FSMIX_SPLIT_FILE")]
    pub split_file: Option<PathBuf>,
    /// Data split: base (= base-train), base-val, base-test, novel-val, novel-test
    #[arg(long, env = "FSMIX_SPLIT")]
    pub split: DataSplit,
    /// Number of scenes
    #[arg(long, env = "FSMIX_N")]
    pub n: usize,
    #[arg(long, env = "FSMIX_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output directory (default: <run-dir>/scenes/<split>)
    #[arg(long, env = "FSMIX_OUT")]
    pub out: Option<PathBuf>,
    /// Scene length in seconds
    #[arg(long, env = "FSMIX_DURATION", default_value_t = 10.0)]
    pub duration: f64,
    /// Render sample rate in Hz
    #[arg(long, env = "FSMIX_SAMPLE_RATE", default_value_t = 44100)]
    pub sample_rate: u32,
    /// Background RMS level in dBFS
    #[arg(long, env = "FSMIX_BACKGROUND_DBFS", default_value_t = -30.0, allow_negative_numbers = true)]
    pub background_dbfs: f64,
    /// Event SNR sampling: discrete (-5..20 dB grid) or uniform (continuous range)
    #[arg(long, env = "FSMIX_SNR_MODE", default_value = "discrete")]
    pub snr_mode: String,
}

#[derive(Debug, Args, Serialize)]
pub struct ExtractClips {
    /// Scene directory holding index.jsonl
    #[arg(long, env = "FSMIX_SCENES")]
    pub scenes: PathBuf,
    /// Clip index output (default: <scenes>/clips.jsonl)
    #[arg(long, env = "FSMIX_OUT")]
    pub out: Option<PathBuf>,
    /// Also write every clip as a 1 s WAV next to the index
    #[arg(long, env = "FSMIX_WRITE_AUDIO")]
    pub write_audio: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct Featurize {
    /// Scene directory with the scene WAVs
    #[arg(long, env = "FSMIX_SCENES")]
    pub scenes: PathBuf,
    /// Clip index (default: <scenes>/clips.jsonl)
    #[arg(long, env = "FSMIX_CLIPS")]
    pub clips: Option<PathBuf>,
    /// Embedding store output (default: <run-dir>/features/<scene dir name>.emb)
    #[arg(long, env = "FSMIX_OUT")]
    pub out: Option<PathBuf>,
    /// Feature sample rate in Hz
    #[arg(long, env = "FSMIX_MEL_SAMPLE_RATE", default_value_t = 16000)]
    pub mel_sample_rate: u32,
    /// Mel bands
    #[arg(long, env = "FSMIX_N_MELS", default_value_t = 64)]
    pub n_mels: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainBase {
    /// Base-train embedding store
    #[arg(long, env = "FSMIX_TRAIN")]
    pub train: PathBuf,
    /// Base-val embedding store
    #[arg(long, env = "FSMIX_VAL")]
    pub val: PathBuf,
    /// Checkpoint output (default: <run-dir>/models/base.ckpt)
    #[arg(long, env = "FSMIX_OUT")]
    pub out: Option<PathBuf>,
    /// Adam learning rate
    #[arg(long, env = "FSMIX_LR", default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, env = "FSMIX_BATCH_SIZE", default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, env = "FSMIX_EPOCHS", default_value_t = 200)]
    pub epochs: usize,
    /// Epochs without validation improvement before stopping
    #[arg(long, env = "FSMIX_PATIENCE", default_value_t = 5)]
    pub patience: usize,
    /// Subtract the mean base-train embedding before normalizing; `auto`
    /// centers stores written by `featurize`
    #[arg(long, env = "FSMIX_CENTER", value_enum, default_value_t = Center::Auto)]
    pub center: Center,
    #[arg(long, env = "FSMIX_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Center {
    Auto,
    On,
    Off,
}

#[derive(Debug, Args, Clone, Serialize)]
pub struct CriteriaArgs {
    /// Support examples per novel class
    #[arg(long, env = "FSMIX_N", default_value_t = 5)]
    pub n: usize,
    /// Support polyphony: mono or poly
    #[arg(long, env = "FSMIX_POLY", default_value = "mono")]
    pub poly: PolyphonyMode,
    /// Support SNR: low, high or mixed
    #[arg(long, env = "FSMIX_SNR", default_value = "mixed")]
    pub snr: SnrFilter,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainDfsl {
    /// Base classifier checkpoint (default: <run-dir>/models/base.ckpt)
    #[arg(long, env = "FSMIX_BASE")]
    pub base: Option<PathBuf>,
    /// Base-train embedding store
    #[arg(long, env = "FSMIX_TRAIN")]
    pub train: PathBuf,
    /// Checkpoint output (default: <run-dir>/models/dfsl.ckpt)
    #[arg(long, env = "FSMIX_OUT")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub criteria: CriteriaArgs,
    /// Episodes
    #[arg(long, env = "FSMIX_ITERS", default_value_t = 1000)]
    pub iters: usize,
    /// Adam learning rate
    #[arg(long, env = "FSMIX_LR", default_value_t = 0.001)]
    pub lr: f64,
    /// Attention source: example (per support) or mean (averaged support)
    #[arg(long, env = "FSMIX_ATT_ON", default_value = "example")]
    pub att_on: AttentionMode,
    #[arg(long, env = "FSMIX_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct Eval {
    /// Few-shot method: proto, dfsl or lr
    #[arg(long, env = "FSMIX_METHOD", default_value = "proto")]
    pub method: Method,
    /// Base classifier checkpoint (default: <run-dir>/models/base.ckpt)
    #[arg(long, env = "FSMIX_BASE")]
    pub base: Option<PathBuf>,
    /// Generator checkpoint for dfsl (default: <run-dir>/models/dfsl.ckpt)
    #[arg(long, env = "FSMIX_GENERATOR")]
    pub generator: Option<PathBuf>,
    /// Stores directory with base-train.emb, base-val.emb, base-test.emb, novel-val.emb, novel-test.emb
    /// (default: <run-dir>/features)
    #[arg(long, env = "FSMIX_FEATURES")]
    pub features: Option<PathBuf>,
    #[command(flatten)]
    pub criteria: CriteriaArgs,
    /// Sampling iterations
    #[arg(long, env = "FSMIX_ITERS", default_value_t = 100)]
    pub iters: usize,
    /// Score threshold
    #[arg(long, env = "FSMIX_THRESHOLD", default_value_t = 0.5)]
    pub threshold: f64,
    /// Fixed LR negative count; tuned on novel-val when omitted
    #[arg(long, env = "FSMIX_LR_NEGATIVES")]
    pub lr_negatives: Option<usize>,
    /// Iterations per grid point when tuning LR negatives
    #[arg(long, env = "FSMIX_TUNE_ITERS", default_value_t = 10)]
    pub tune_iters: usize,
    #[arg(long, env = "FSMIX_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output directory (default: <run-dir>/eval/<method>_n<n>_<poly>_<snr>)
    #[arg(long, env = "FSMIX_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct Report {
    /// report.json files; default: every <run-dir>/eval/*/report.json
    #[arg(long = "input", env = "FSMIX_INPUTS", value_delimiter = ',')]
    pub inputs: Vec<PathBuf>,
    /// Output directory (default: <run-dir>/report)
    #[arg(long, env = "FSMIX_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthWorld {
    #[arg(long, env = "FSMIX_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output directory (default: <run-dir>/features)
    #[arg(long, env = "FSMIX_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, env = "FSMIX_DIM", default_value_t = 64)]
    pub dim: usize,
    #[arg(long, env = "FSMIX_N_BASE", default_value_t = 20)]
    pub n_base: usize,
    #[arg(long, env = "FSMIX_N_NOVEL", default_value_t = 5)]
    pub n_novel: usize,
    /// Scale factor on the default clip counts per split
    #[arg(long, env = "FSMIX_SIZE", default_value_t = 1.0)]
    pub size: f64,
    /// Noiseless limit: clips equal their class prototype
    #[arg(long, env = "FSMIX_NOISELESS")]
    pub noiseless: bool,
}
