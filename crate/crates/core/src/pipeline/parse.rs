//! Validation of stage replies.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::StageKind;
use crate::transcript::SpeakerRole;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StageItem {
    Correction {
        reference_sentence: String,
        rationale: String,
        corrected_sentence: String,
        speaker: SpeakerRole,
    },
    Diarization {
        sentence: String,
        justification: String,
        speaker: SpeakerRole,
    },
    Punctuation {
        sentence: String,
    },
}

impl StageItem {
    /// The text this item hands to the next stage.
    pub fn output_sentence(&self) -> &str {
        match self {
            StageItem::Punctuation { sentence } | StageItem::Diarization { sentence, .. } => sentence,
            StageItem::Correction { corrected_sentence, .. } => corrected_sentence,
        }
    }

    pub fn speaker(&self) -> Option<SpeakerRole> {
        match self {
            StageItem::Punctuation { .. } => None,
            StageItem::Diarization { speaker, .. } | StageItem::Correction { speaker, .. } => Some(*speaker),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("no JSON array found in reply")]
    NoArray,
    #[error("item {index}: {message}")]
    Schema { index: usize, message: String },
    #[error("expected {expected} items, got {actual}")]
    CountMismatch { expected: usize, actual: usize },
}

fn strip_fences(raw: &str) -> String {
    raw.lines()
        .filter(|line| !line.trim_start().starts_with("```"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Finds the first `[` that starts a complete JSON array.
fn locate_array(text: &str) -> Option<Vec<Value>> {
    for (pos, _) in text.match_indices('[') {
        let mut stream = serde_json::Deserializer::from_str(&text[pos..]).into_iter::<Value>();
        if let Some(Ok(Value::Array(items))) = stream.next() {
            return Some(items);
        }
    }
    None
}

fn string_field(obj: &serde_json::Map<String, Value>, index: usize, name: &str) -> Result<String, ParseError> {
    match obj.get(name) {
        Some(Value::String(s)) if !s.trim().is_empty() => Ok(s.trim().to_string()),
        Some(Value::String(_)) => Err(ParseError::Schema { index, message: format!("field {name:?} is empty") }),
        Some(_) => Err(ParseError::Schema { index, message: format!("field {name:?} is not a string") }),
        None => Err(ParseError::Schema { index, message: format!("missing field {name:?}") }),
    }
}

fn speaker_field(obj: &serde_json::Map<String, Value>, index: usize) -> Result<SpeakerRole, ParseError> {
    match string_field(obj, index, "speaker")?.as_str() {
        "Doctor" => Ok(SpeakerRole::Doctor),
        "Patient" => Ok(SpeakerRole::Patient),
        other => Err(ParseError::Schema { index, message: format!("speaker {other:?} is not Doctor or Patient") }),
    }
}

/// Extracts and validates the items of a stage reply.
///
/// Surrounding prose and code fences are ignored. Correction replies must
/// have exactly `input_lines` items; punctuation and diarization replies at
/// least that many, since sentences may be split.
pub fn parse_stage_response(stage: StageKind, raw: &str, input_lines: usize) -> Result<Vec<StageItem>, ParseError> {
    let values = locate_array(raw)
        .or_else(|| locate_array(&strip_fences(raw)))
        .ok_or(ParseError::NoArray)?;

    let mut items = Vec::with_capacity(values.len());
    for (index, value) in values.iter().enumerate() {
        let obj = value
            .as_object()
            .ok_or_else(|| ParseError::Schema { index, message: "item is not an object".into() })?;
        let item = match stage {
            StageKind::Punctuation => StageItem::Punctuation { sentence: string_field(obj, index, "sentence")? },
            StageKind::Diarization => StageItem::Diarization {
                sentence: string_field(obj, index, "sentence")?,
                justification: string_field(obj, index, "justification")?,
                speaker: speaker_field(obj, index)?,
            },
            StageKind::Correction => StageItem::Correction {
                reference_sentence: string_field(obj, index, "reference_sentence")?,
                rationale: string_field(obj, index, "rationale")?,
                corrected_sentence: string_field(obj, index, "corrected_sentence")?,
                speaker: speaker_field(obj, index)?,
            },
        };
        items.push(item);
    }

    let count_ok = match stage {
        StageKind::Correction => items.len() == input_lines,
        StageKind::Punctuation | StageKind::Diarization => items.len() >= input_lines,
    };
    if !count_ok {
        return Err(ParseError::CountMismatch { expected: input_lines, actual: items.len() });
    }
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_array() {
        let items = parse_stage_response(StageKind::Punctuation, r#"[{"sentence":"Hello."}]"#, 1).unwrap();
        assert_eq!(items, vec![StageItem::Punctuation { sentence: "Hello.".into() }]);
    }

    #[test]
    fn fenced_and_wrapped_in_prose() {
        let raw = "Sure! Here is the result:\n```json\n[{\"sentence\":\"Hello.\"}]\n```\nLet me know [if needed].";
        let fenced = parse_stage_response(StageKind::Punctuation, raw, 1).unwrap();
        let plain = parse_stage_response(StageKind::Punctuation, r#"[{"sentence":"Hello."}]"#, 1).unwrap();
        assert_eq!(fenced, plain);
    }

    #[test]
    fn bracketed_prose_before_the_array_is_skipped() {
        let raw = "[note] output follows: [{\"sentence\":\"Hi.\"},{\"sentence\":\"Bye.\"}]";
        assert_eq!(parse_stage_response(StageKind::Punctuation, raw, 2).unwrap().len(), 2);
    }

    #[test]
    fn unknown_speaker_is_a_schema_error() {
        let raw = r#"[{"sentence":"Hi.","justification":"greets","speaker":"Nurse"}]"#;
        assert!(matches!(
            parse_stage_response(StageKind::Diarization, raw, 1),
            Err(ParseError::Schema { index: 0, .. })
        ));
    }

    #[test]
    fn missing_field_is_a_schema_error() {
        let raw = r#"[{"reference_sentence":"a","corrected_sentence":"b","speaker":"Doctor"}]"#;
        let err = parse_stage_response(StageKind::Correction, raw, 1).unwrap_err();
        assert_eq!(err, ParseError::Schema { index: 0, message: "missing field \"rationale\"".into() });
    }

    #[test]
    fn correction_must_keep_line_count() {
        let raw = r#"[{"reference_sentence":"a","rationale":"r","corrected_sentence":"b","speaker":"Doctor"}]"#;
        assert_eq!(
            parse_stage_response(StageKind::Correction, raw, 2),
            Err(ParseError::CountMismatch { expected: 2, actual: 1 })
        );
    }

    #[test]
    fn punctuation_may_split_but_not_merge() {
        let raw = r#"[{"sentence":"A."},{"sentence":"B."},{"sentence":"C."}]"#;
        assert!(parse_stage_response(StageKind::Punctuation, raw, 2).is_ok());
        assert!(matches!(
            parse_stage_response(StageKind::Punctuation, raw, 4),
            Err(ParseError::CountMismatch { .. })
        ));
    }

    #[test]
    fn garbage_is_no_array() {
        assert_eq!(parse_stage_response(StageKind::Punctuation, "I cannot help.", 1), Err(ParseError::NoArray));
        assert_eq!(parse_stage_response(StageKind::Punctuation, "[[[", 1), Err(ParseError::NoArray));
    }

    #[test]
    fn items_round_trip_through_json() {
        let items = vec![
            StageItem::Punctuation { sentence: "A.".into() },
            StageItem::Diarization { sentence: "B.".into(), justification: "j".into(), speaker: SpeakerRole::Patient },
            StageItem::Correction {
                reference_sentence: "c".into(),
                rationale: "r".into(),
                corrected_sentence: "C.".into(),
                speaker: SpeakerRole::Doctor,
            },
        ];
        let json = serde_json::to_string(&items).unwrap();
        assert_eq!(serde_json::from_str::<Vec<StageItem>>(&json).unwrap(), items);
    }
}
