//! Medical concept annotation.
//!
//! Annotators label contiguous token spans with a [`ConceptCategory`]. Two
//! implementations ship: an offline greedy longest-match
//! [`DictionaryAnnotator`] and an HTTP client for an external healthcare NLP
//! service ([`ExternalAnnotator`]).

mod dictionary;
mod external;
mod lemma;

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::transcript::TokenSequence;

pub use dictionary::{ConceptDictionary, DictionaryAnnotator, DictionaryEntry, DictionaryError};
pub use external::{
    CategoryMap, ExternalAnnotator, ExternalFetch, Secret, DEFAULT_CREDENTIALS_ENV,
};
pub use lemma::lemmatize;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConceptCategory {
    MedicalProblem,
    Medication,
    LaboratoryData,
    Procedure,
    MedicationRoute,
    SubstanceAbuse,
    BiologicalMeasurementResult,
    BodyFunction,
    BodyMeasurementValue,
    Other(String),
}

impl ConceptCategory {
    pub const REPORTED: [ConceptCategory; 9] = [
        ConceptCategory::MedicalProblem,
        ConceptCategory::Medication,
        ConceptCategory::LaboratoryData,
        ConceptCategory::Procedure,
        ConceptCategory::MedicationRoute,
        ConceptCategory::SubstanceAbuse,
        ConceptCategory::BiologicalMeasurementResult,
        ConceptCategory::BodyFunction,
        ConceptCategory::BodyMeasurementValue,
    ];

    /// Stable label used in files and reports.
    pub fn label(&self) -> &str {
        match self {
            ConceptCategory::MedicalProblem => "medical_problem",
            ConceptCategory::Medication => "medication",
            ConceptCategory::LaboratoryData => "laboratory_data",
            ConceptCategory::Procedure => "procedure",
            ConceptCategory::MedicationRoute => "medication_route",
            ConceptCategory::SubstanceAbuse => "substance_abuse",
            ConceptCategory::BiologicalMeasurementResult => "biological_measurement_result",
            ConceptCategory::BodyFunction => "body_function",
            ConceptCategory::BodyMeasurementValue => "body_measurement_value",
            ConceptCategory::Other(label) => label,
        }
    }

    pub fn from_label(label: &str) -> Self {
        let label = label.trim();
        Self::REPORTED
            .iter()
            .find(|c| c.label() == label)
            .cloned()
            .unwrap_or_else(|| ConceptCategory::Other(label.to_string()))
    }
}

impl fmt::Display for ConceptCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl Serialize for ConceptCategory {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for ConceptCategory {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let label = String::deserialize(deserializer)?;
        Ok(ConceptCategory::from_label(&label))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptAnnotation {
    pub span: Range<usize>,
    /// Tokens of `span` joined by single spaces.
    pub surface: String,
    pub category: ConceptCategory,
    pub lemma: String,
}

#[derive(Debug, Error)]
pub enum AnnotatorError {
    #[error("annotator unavailable: {0}")]
    Unavailable(String),
    #[error("mention at characters {start}..{end} falls outside the {len}-character text")]
    Mapping { start: usize, end: usize, len: usize },
    #[error("annotation cache: {0}")]
    Cache(#[from] std::io::Error),
}

pub trait Annotator {
    /// Short identifier recorded in reports, e.g. `dictionary`.
    fn name(&self) -> &str;

    /// Returns sorted, non-overlapping annotations.
    fn annotate(&self, seq: &TokenSequence) -> Result<Vec<ConceptAnnotation>, AnnotatorError>;
}

/// Checks the ordering invariants every annotator output must satisfy.
pub fn check_annotations(
    seq: &TokenSequence,
    annotations: &[ConceptAnnotation],
) -> Result<(), String> {
    let mut prev_end = 0;
    for (i, ann) in annotations.iter().enumerate() {
        if ann.span.start >= ann.span.end || ann.span.end > seq.len() {
            return Err(format!("annotation {i} span {:?} invalid for {} tokens", ann.span, seq.len()));
        }
        if i > 0 && ann.span.start < prev_end {
            return Err(format!("annotation {i} overlaps or precedes its predecessor"));
        }
        if ann.surface != seq.join(ann.span.clone()) {
            return Err(format!("annotation {i} surface does not match its tokens"));
        }
        prev_end = ann.span.end;
    }
    Ok(())
}

/// Resolves overlapping candidate spans: earlier start wins, then longer span.
pub(crate) fn resolve_overlaps(mut candidates: Vec<ConceptAnnotation>) -> (Vec<ConceptAnnotation>, usize) {
    candidates.sort_by(|a, b| a.span.start.cmp(&b.span.start).then(b.span.end.cmp(&a.span.end)));
    let mut kept: Vec<ConceptAnnotation> = Vec::with_capacity(candidates.len());
    let mut dropped = 0;
    for ann in candidates {
        match kept.last() {
            Some(last) if ann.span.start < last.span.end => dropped += 1,
            _ => kept.push(ann),
        }
    }
    (kept, dropped)
}
