//! Detection and measurement of language confusion in LLM outputs.
//!
//! A response is confused when it drifts out of the language the user asked
//! for, either for whole lines or for isolated words. The crate is organised
//! around the measurement pipeline:
//!
//! - [`lang`]: language registry, Unicode script classes, line segmentation.
//! - [`lid`]: a character n-gram Naive-Bayes language identifier plus an
//!   adapter for externally produced predictions.
//! - [`detect`]: line-level and word-level confusion detectors.
//! - [`metrics`]: LPR / WPR / LCPR / line accuracy, grouped aggregation and
//!   report rendering.
//! - [`corpus`]: prompt/response schemas, prompt filtering, cross-lingual
//!   instruction amendment and few-shot templates.
//! - [`decoding`]: nucleus sampling with temperature, greedy and beam search
//!   over a table-driven toy LM, and confusion-point analysis of token traces.
//!
//! Batch operations run on rayon when the `parallel` feature is enabled (the
//! default) and fall back to plain iterators otherwise; see [`par`].

pub mod corpus;
pub mod decoding;
pub mod detect;
pub mod lang;
pub mod lid;
pub mod metrics;
pub mod par;

mod jsonl;

pub use jsonl::{read_jsonl, write_jsonl, JsonlError};
pub use lang::{LanguageCode, ScriptClass};
