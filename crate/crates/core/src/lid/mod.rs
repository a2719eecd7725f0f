//! Line-level language identification.
//!
//! [`NGramLidModel`] is a multinomial Naive-Bayes classifier over character
//! n-grams with additive smoothing. [`ExternalPredictions`] lets predictions
//! from another LID tool stand in for it. Both implement [`LineClassifier`],
//! which is what the detectors consume.

mod eval;
mod external;
mod features;
mod format;
mod model;

use std::io;

use serde::{Deserialize, Serialize};

use crate::lang::LanguageCode;

pub use eval::{cross_validate, HeldOutReport};
pub use external::{load_external_predictions, ExternalPredictions};
pub use features::{extract_ngrams, normalize};
pub use format::{load_model, save_model, FORMAT_VERSION, MAGIC};
pub use model::{load_training_corpus, parse_training_corpus, NGramLidModel, TrainConfig};

/// Bundled mini-corpus: 40 sentences in each of the 15 languages, TSV `lang\ttext`.
pub const BUILTIN_CORPUS: &str = include_str!("../../data/lid_corpus.tsv");

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LidPrediction {
    pub language: LanguageCode,
    pub confidence: f64,
}

impl LidPrediction {
    pub const UNDETERMINED: LidPrediction = LidPrediction {
        language: LanguageCode::Und,
        confidence: 0.0,
    };
}

/// Anything that can assign a language to one response line.
pub trait LineClassifier: Sync {
    fn classify_line(&self, response_id: &str, line_index: usize, line: &str) -> LidPrediction;
}

#[derive(Debug, thiserror::Error)]
pub enum LidError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("language {0} has no usable characters in the training corpus")]
    NoUsableCharacters(LanguageCode),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate prediction for ({response_id}, {line_index}) at line {line}")]
    DuplicateKey {
        response_id: String,
        line_index: usize,
        line: usize,
    },
    #[error("not an n-gram LID model file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported model format version {found} (expected {expected})")]
    VersionMismatch { found: u16, expected: u16 },
    #[error("model checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}
