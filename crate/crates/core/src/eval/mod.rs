//! Evaluation protocol: criteria-constrained support sampling, repeated
//! joint-label-space scoring, per-class F-measure and breakdowns by test
//! polyphony and SNR.

mod breakdown;
mod criteria;
mod metrics;
mod protocol;
mod report;
mod support;

pub use breakdown::{breakdown, nearest_snr_level, polyphony_bucket, Breakdown, POLYPHONY_CAP};
pub use criteria::{PolyphonyMode, SnrFilter, SupportCriteria, HIGH_SNR_DB, LOW_SNR_DB, SUPPORT_SIZES};
pub use metrics::{f_measure, Prf};
pub use protocol::{
    evaluate_iteration, run_protocol, tune_lr_negatives, EvalData, IterationResult, JointPool, ProtocolConfig,
    LR_NEGATIVE_GRID,
};
pub use report::{
    percentile, summarize, write_report, BucketSummary, ClassSummary, EvalReport, Summary,
};
pub use support::{conforming_clips, sample_support};
