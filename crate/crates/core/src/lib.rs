//! Evaluation toolkit for medical conversation transcripts.
//!
//! - [`transcript`]: conversations, normalization, tokenization, corpus files
//! - [`align`]: word-level edit alignment
//! - [`concepts`]: medical concept annotators and lemmatization
//! - [`metrics`]: WER, speaker-attributed WER, medical-concept WER
//! - [`pipeline`]: LLM punctuation / diarization / correction stages, audio slicing
//! - [`analysis`]: per-category error deltas and character-distance analysis
//! - [`report`]: run configuration, reports, CSV tables and SVG plots
//! - [`cli`]: the `medscore` command line

pub mod align;
pub mod analysis;
pub mod cli;
pub mod concepts;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod transcript;
mod util;

pub use util::sha256_hex;
