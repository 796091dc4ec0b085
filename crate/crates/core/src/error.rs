use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),
    #[error("sample-rate mismatch: {left} Hz vs {right} Hz")]
    SampleRateMismatch { left: u32, right: u32 },
    #[error("placement overflow: event of {event_len} samples at offset {offset} exceeds base of {base_len} samples")]
    PlacementOverflow {
        offset: usize,
        event_len: usize,
        base_len: usize,
    },
    #[error("buffer too short: {len} samples, need at least {min}")]
    BufferTooShort { len: usize, min: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("empty manifest")]
    EmptyManifest,
    #[error("duplicate entry: {0}")]
    DuplicateEntry(String),
    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("empty class label in row {0}")]
    EmptyClass(usize),
    #[error("insufficient eligible classes: need {needed}, have {available}")]
    InsufficientClasses { needed: usize, available: usize },
    #[error("class {class:?} has no clips")]
    NoClips { class: String },
    #[error("insufficient conforming clips for class {class:?} under {criteria}: need {needed}, have {available}")]
    InsufficientSupport {
        class: String,
        criteria: String,
        needed: usize,
        available: usize,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("undefined cosine: zero-norm vector ({0})")]
    ZeroNorm(String),
    #[error("unknown class: {0}")]
    UnknownClass(String),
    #[error("corrupt store: {0}")]
    CorruptStore(String),
    #[error("wav: {0}")]
    Wav(#[from] hound::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
