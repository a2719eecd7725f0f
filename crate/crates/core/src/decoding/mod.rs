//! Decoding over a table-driven toy LM and confusion-point analysis of traces.
//!
//! The sampling order is fixed: optional top-k cut on the logits, then
//! temperature softmax, then the nucleus, then renormalization inside the
//! nucleus, then one draw from a ChaCha8 generator.

mod beam;
mod cp;
mod sampling;
mod simulate;
mod toylm;
mod trace;

use crate::jsonl::JsonlError;

pub use beam::{beam_search, greedy, BeamConfig, Hypothesis};
pub use cp::{
    cp_aggregate, entropy, find_confusion_points, load_cp_annotations, parse_cp_annotations,
    step_statistics, CpCell, CpMatrix, CpReport, CpRow, StepStatistics,
};
pub use sampling::{
    log_softmax, nucleus, nucleus_distribution, sample_step, softmax_t, top_k_mask,
    SamplingConfig, StepRecord,
};
pub use simulate::{
    frequency_summary, simulate, sweep, sweep_grid, RunSummary, SweepCell, TokenFrequency,
};
pub use toylm::{generate, Generation, ToyLm, QUICK_BROWN_FOX};
pub use trace::{read_trace, write_trace, TraceStep};

#[derive(Debug, thiserror::Error)]
pub enum DecodingError {
    #[error("logit vector is empty")]
    EmptyLogits,
    #[error("logit {index} is {value}; only finite values and -inf are allowed")]
    BadLogit { index: usize, value: f64 },
    #[error("every logit is masked")]
    AllMasked,
    #[error("invalid sampling configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("toy LM has no row for context {0:?}")]
    MissingContext(Vec<String>),
    #[error("invalid toy LM: {0}")]
    InvalidLm(String),
    #[error("trace misaligned: {0}")]
    Misaligned(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
