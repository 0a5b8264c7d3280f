//! Client for an external healthcare entity-extraction service.
//!
//! The request is `{"documentContent": <text>}` where the text is the token
//! sequence joined by single spaces. The response carries `entityMentions`,
//! each with a `type` and `text: {content, beginOffset}`; offsets are counted
//! in Unicode scalar values of that joined text. A mention maps to every token
//! its character range intersects. Raw responses are cached under
//! `<cache_dir>/<sha256 of text>.json`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::time::Duration;

use serde::Deserialize;

use super::{lemmatize, resolve_overlaps, Annotator, AnnotatorError, ConceptAnnotation, ConceptCategory};
use crate::transcript::TokenSequence;
use crate::util::{atomic_write, post_json, sha256_hex};

pub const DEFAULT_CREDENTIALS_ENV: &str = "MEDSCORE_HEALTHCARE_NLP_TOKEN";

/// A credential that never prints itself.
#[derive(Clone)]
pub struct Secret(String);

impl Secret {
    pub fn new(value: impl Into<String>) -> Self {
        Secret(value.into())
    }

    pub fn from_env(var: &str) -> Result<Self, AnnotatorError> {
        std::env::var(var)
            .map(Secret)
            .map_err(|_| AnnotatorError::Unavailable(format!("credentials variable {var} is not set")))
    }

    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Secret(***)")
    }
}

/// Maps provider entity types onto report categories.
#[derive(Debug, Clone)]
pub struct CategoryMap(BTreeMap<String, ConceptCategory>);

impl Default for CategoryMap {
    fn default() -> Self {
        use ConceptCategory::*;
        let pairs = [
            ("PROBLEM", MedicalProblem),
            ("MEDICINE", Medication),
            ("LABORATORY_DATA", LaboratoryData),
            ("LAB_RESULT", LaboratoryData),
            ("LAB_VALUE", LaboratoryData),
            ("LAB_UNIT", LaboratoryData),
            ("PROCEDURE", Procedure),
            ("PROCEDURE_RESULT", Procedure),
            ("MED_ROUTE", MedicationRoute),
            ("SUBSTANCE_ABUSE", SubstanceAbuse),
            ("BM_RESULT", BiologicalMeasurementResult),
            ("BODY_MEASUREMENT", BiologicalMeasurementResult),
            ("BM_VALUE", BodyMeasurementValue),
            ("BM_UNIT", BodyMeasurementValue),
            ("BODY_FUNCTION", BodyFunction),
        ];
        CategoryMap(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }
}

impl CategoryMap {
    pub fn with(mut self, entity_type: &str, category: ConceptCategory) -> Self {
        self.0.insert(entity_type.to_string(), category);
        self
    }

    pub fn category(&self, entity_type: &str) -> ConceptCategory {
        self.0
            .get(entity_type)
            .cloned()
            .unwrap_or_else(|| ConceptCategory::Other(entity_type.to_ascii_lowercase()))
    }
}

#[derive(Debug, Deserialize)]
struct Response {
    #[serde(default, rename = "entityMentions")]
    entity_mentions: Vec<Mention>,
}

#[derive(Debug, Deserialize)]
struct Mention {
    #[serde(rename = "type")]
    entity_type: String,
    text: MentionText,
}

#[derive(Debug, Deserialize)]
struct MentionText {
    content: String,
    #[serde(default, rename = "beginOffset")]
    begin_offset: usize,
}

#[derive(Debug, Clone)]
pub struct ExternalFetch {
    pub annotations: Vec<ConceptAnnotation>,
    /// Mentions that landed on no token or lost an overlap.
    pub dropped: usize,
    pub from_cache: bool,
}

#[derive(Debug, Clone)]
pub struct ExternalAnnotator {
    pub endpoint: String,
    pub credentials: Secret,
    pub cache_dir: PathBuf,
    pub categories: CategoryMap,
    pub timeout: Duration,
    /// Serve only from cache.
    pub offline: bool,
}

impl ExternalAnnotator {
    pub fn new(endpoint: impl Into<String>, credentials: Secret, cache_dir: impl Into<PathBuf>) -> Self {
        ExternalAnnotator {
            endpoint: endpoint.into(),
            credentials,
            cache_dir: cache_dir.into(),
            categories: CategoryMap::default(),
            timeout: Duration::from_secs(60),
            offline: false,
        }
    }

    pub fn cache_path(&self, text: &str) -> PathBuf {
        self.cache_dir.join(format!("{}.json", sha256_hex(text)))
    }

    pub fn fetch(&self, seq: &TokenSequence) -> Result<ExternalFetch, AnnotatorError> {
        let text = seq.tokens.join(" ");
        let cache_path = self.cache_path(&text);
        let (raw, from_cache) = match std::fs::read_to_string(&cache_path) {
            Ok(raw) => (raw, true),
            Err(_) if self.offline => {
                return Err(AnnotatorError::Unavailable(format!(
                    "offline and no cached response at {}",
                    cache_path.display()
                )))
            }
            Err(_) => {
                let raw = self.request(&text)?;
                atomic_write(&cache_path, raw.as_bytes())?;
                (raw, false)
            }
        };
        let response: Response = serde_json::from_str(&raw)
            .map_err(|e| AnnotatorError::Unavailable(format!("malformed response: {e}")))?;
        let (annotations, dropped) = project_mentions(seq, &response.entity_mentions, &self.categories)?;
        if dropped > 0 {
            log::warn!("{dropped} entity mentions could not be mapped onto tokens");
        }
        Ok(ExternalFetch { annotations, dropped, from_cache })
    }

    fn request(&self, text: &str) -> Result<String, AnnotatorError> {
        let body = serde_json::json!({ "documentContent": text });
        let headers = [("Authorization", format!("Bearer {}", self.credentials.expose()))];
        let reply = post_json(&self.endpoint, &headers, &body, self.timeout)
            .map_err(AnnotatorError::Unavailable)?;
        if !(200..300).contains(&reply.status) {
            return Err(AnnotatorError::Unavailable(format!(
                "HTTP {}: {}",
                reply.status,
                reply.body.trim()
            )));
        }
        Ok(reply.body)
    }
}

impl Annotator for ExternalAnnotator {
    fn name(&self) -> &str {
        "external"
    }

    fn annotate(&self, seq: &TokenSequence) -> Result<Vec<ConceptAnnotation>, AnnotatorError> {
        self.fetch(seq).map(|f| f.annotations)
    }
}

fn project_mentions(
    seq: &TokenSequence,
    mentions: &[Mention],
    categories: &CategoryMap,
) -> Result<(Vec<ConceptAnnotation>, usize), AnnotatorError> {
    // Character range of every token in the space-joined text.
    let mut bounds = Vec::with_capacity(seq.len());
    let mut pos = 0;
    for token in &seq.tokens {
        let len = token.chars().count();
        bounds.push(pos..pos + len);
        pos += len + 1;
    }
    let text_len = pos.saturating_sub(1);

    let mut candidates = Vec::new();
    let mut dropped = 0;
    for mention in mentions {
        let start = mention.text.begin_offset;
        let end = start + mention.text.content.chars().count();
        if end > text_len {
            return Err(AnnotatorError::Mapping { start, end, len: text_len });
        }
        let first = bounds.iter().position(|b| b.start < end && start < b.end);
        let last = bounds.iter().rposition(|b| b.start < end && start < b.end);
        match (first, last) {
            (Some(first), Some(last)) => {
                let surface = seq.join(first..last + 1);
                candidates.push(ConceptAnnotation {
                    span: first..last + 1,
                    lemma: lemmatize(&surface),
                    surface,
                    category: categories.category(&mention.entity_type),
                });
            }
            _ => dropped += 1,
        }
    }
    let (annotations, overlapping) = resolve_overlaps(candidates);
    Ok((annotations, dropped + overlapping))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mention(t: &str, content: &str, begin: usize) -> Mention {
        Mention {
            entity_type: t.into(),
            text: MentionText { content: content.into(), begin_offset: begin },
        }
    }

    #[test]
    fn offsets_project_onto_tokens() {
        // "the patient takes blood pressure tablets": tokens 3-4 span characters 18..32.
        let seq = TokenSequence::from_text("the patient takes blood pressure tablets");
        let (anns, dropped) =
            project_mentions(&seq, &[mention("BM_RESULT", "blood pressure", 18)], &CategoryMap::default())
                .unwrap();
        assert_eq!(dropped, 0);
        assert_eq!(anns.len(), 1);
        assert_eq!(anns[0].span, 3..5);
        assert_eq!(anns[0].category, ConceptCategory::BiologicalMeasurementResult);
    }

    #[test]
    fn partial_token_overlap_takes_whole_token() {
        let seq = TokenSequence::from_text("took amoxicillin daily");
        let (anns, _) =
            project_mentions(&seq, &[mention("MEDICINE", "moxi", 7)], &CategoryMap::default()).unwrap();
        assert_eq!(anns[0].span, 1..2);
        assert_eq!(anns[0].surface, "amoxicillin");
    }

    #[test]
    fn out_of_range_offsets_are_mapping_errors() {
        let seq = TokenSequence::from_text("short text");
        let err = project_mentions(&seq, &[mention("PROBLEM", "fever", 20)], &CategoryMap::default());
        assert!(matches!(err, Err(AnnotatorError::Mapping { .. })));
    }

    #[test]
    fn whitespace_only_mentions_are_dropped() {
        let seq = TokenSequence::from_text("a b");
        let (anns, dropped) =
            project_mentions(&seq, &[mention("PROBLEM", " ", 1)], &CategoryMap::default()).unwrap();
        assert!(anns.is_empty());
        assert_eq!(dropped, 1);
    }

    #[test]
    fn unmapped_types_fall_into_other() {
        assert_eq!(
            CategoryMap::default().category("ANATOMICAL_STRUCTURE"),
            ConceptCategory::Other("anatomical_structure".into())
        );
    }

    #[test]
    fn secret_is_redacted() {
        assert_eq!(format!("{:?}", Secret::new("hunter2")), "Secret(***)");
    }
}
