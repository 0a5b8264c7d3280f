//! Three-stage LLM post-processing of ASR output: punctuation, diarization,
//! correction. Each stage runs over fixed-size segments of lines.

use std::fmt;
use std::io;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::transcript::{SpeakerRole, Transcript, TranscriptError};
use crate::util::sha256_hex;

pub mod asr;
pub mod audio;
pub mod cache;
pub mod client;
pub mod parse;

pub use asr::{AsrCommand, AsrError};
pub use audio::{check_pcm16, slice_audio_pcm, AudioError, AudioSlice, DEFAULT_SLICE_SECONDS};
pub use cache::{RawRecord, ResponseCache};
pub use client::{
    ChatClient, ChatError, EchoChatClient, HttpChatClient, MockChatClient, ModelIdentity, OfflineClient,
    ProviderKind, ScriptedChatClient,
};
pub use parse::{parse_stage_response, ParseError, StageItem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    Punctuation,
    Diarization,
    Correction,
}

impl StageKind {
    pub const ALL: [StageKind; 3] = [StageKind::Punctuation, StageKind::Diarization, StageKind::Correction];

    pub fn label(self) -> &'static str {
        match self {
            StageKind::Punctuation => "punctuation",
            StageKind::Diarization => "diarization",
            StageKind::Correction => "correction",
        }
    }
}

impl fmt::Display for StageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for StageKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StageKind::ALL
            .into_iter()
            .find(|k| k.label() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown stage {s:?} (expected punctuation, diarization or correction)"))
    }
}

pub const EXAMPLES_PLACEHOLDER: &str = "{examples}";
pub const SEGMENT_PLACEHOLDER: &str = "{transcript_segments}";

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template is missing {0}")]
    Missing(&'static str),
    #[error("template contains {0} more than once")]
    Repeated(&'static str),
    #[error("{EXAMPLES_PLACEHOLDER} must come before {SEGMENT_PLACEHOLDER}")]
    Order,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub stage: StageKind,
    pub body: String,
}

const PUNCTUATION_TEMPLATE: &str = include_str!("../../data/prompts/punctuation.txt");
const DIARIZATION_TEMPLATE: &str = include_str!("../../data/prompts/diarization.txt");
const CORRECTION_TEMPLATE: &str = include_str!("../../data/prompts/correction.txt");
const PUNCTUATION_EXAMPLES: &str = include_str!("../../data/fewshot/punctuation.json");
const DIARIZATION_EXAMPLES: &str = include_str!("../../data/fewshot/diarization.json");
const CORRECTION_EXAMPLES: &str = include_str!("../../data/fewshot/correction.json");

impl PromptTemplate {
    pub fn new(stage: StageKind, body: impl Into<String>) -> Result<Self, TemplateError> {
        let t = PromptTemplate { stage, body: body.into() };
        t.placeholder_positions()?;
        Ok(t)
    }

    /// The bundled template for `stage`.
    pub fn default_for(stage: StageKind) -> Self {
        let body = match stage {
            StageKind::Punctuation => PUNCTUATION_TEMPLATE,
            StageKind::Diarization => DIARIZATION_TEMPLATE,
            StageKind::Correction => CORRECTION_TEMPLATE,
        };
        PromptTemplate { stage, body: body.trim_end_matches('\n').to_string() }
    }

    fn placeholder_positions(&self) -> Result<(usize, usize), TemplateError> {
        let find = |p: &'static str| -> Result<usize, TemplateError> {
            let mut hits = self.body.match_indices(p).map(|(i, _)| i);
            let first = hits.next().ok_or(TemplateError::Missing(p))?;
            if hits.next().is_some() {
                return Err(TemplateError::Repeated(p));
            }
            Ok(first)
        };
        let (e, s) = (find(EXAMPLES_PLACEHOLDER)?, find(SEGMENT_PLACEHOLDER)?);
        if e > s {
            return Err(TemplateError::Order);
        }
        Ok((e, s))
    }

    /// Literal text between the examples and the transcript segment.
    pub(crate) fn middle(&self) -> Option<&str> {
        let (e, s) = self.placeholder_positions().ok()?;
        Some(&self.body[e + EXAMPLES_PLACEHOLDER.len()..s])
    }

    /// Literal text after the transcript segment.
    pub(crate) fn suffix(&self) -> Option<&str> {
        let (_, s) = self.placeholder_positions().ok()?;
        Some(&self.body[s + SEGMENT_PLACEHOLDER.len()..])
    }
}

/// The bundled few-shot example blocks for `stage` (ten of them).
pub fn default_examples(stage: StageKind) -> Vec<String> {
    let raw = match stage {
        StageKind::Punctuation => PUNCTUATION_EXAMPLES,
        StageKind::Diarization => DIARIZATION_EXAMPLES,
        StageKind::Correction => CORRECTION_EXAMPLES,
    };
    serde_json::from_str(raw).expect("bundled few-shot examples are a JSON array of strings")
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ConfigError {
    #[error("segment_lines must be at least 1")]
    ZeroSegment,
    #[error("temperature {0} is outside [0, 0.1]")]
    Temperature(f64),
    #[error("{stage} config carries a {template} template")]
    WrongTemplate { stage: StageKind, template: StageKind },
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("no stages requested")]
    NoStages,
    #[error("stages must be in pipeline order without repeats, got {0}")]
    StageOrder(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    pub stage: StageKind,
    pub segment_lines: usize,
    pub temperature: f64,
    pub max_retries: usize,
    pub few_shot_examples: Vec<String>,
    pub template: PromptTemplate,
}

impl StageConfig {
    pub fn default_for(stage: StageKind) -> Self {
        StageConfig {
            stage,
            segment_lines: 10,
            temperature: 0.0,
            max_retries: 2,
            few_shot_examples: default_examples(stage),
            template: PromptTemplate::default_for(stage),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.segment_lines == 0 {
            return Err(ConfigError::ZeroSegment);
        }
        if !(0.0..=0.1).contains(&self.temperature) {
            return Err(ConfigError::Temperature(self.temperature));
        }
        if self.template.stage != self.stage {
            return Err(ConfigError::WrongTemplate { stage: self.stage, template: self.template.stage });
        }
        self.template.placeholder_positions()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub punctuation: StageConfig,
    pub diarization: StageConfig,
    pub correction: StageConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            punctuation: StageConfig::default_for(StageKind::Punctuation),
            diarization: StageConfig::default_for(StageKind::Diarization),
            correction: StageConfig::default_for(StageKind::Correction),
        }
    }
}

impl PipelineConfig {
    pub fn stage(&self, stage: StageKind) -> &StageConfig {
        match stage {
            StageKind::Punctuation => &self.punctuation,
            StageKind::Diarization => &self.diarization,
            StageKind::Correction => &self.correction,
        }
    }

    pub fn stage_mut(&mut self, stage: StageKind) -> &mut StageConfig {
        match stage {
            StageKind::Punctuation => &mut self.punctuation,
            StageKind::Diarization => &mut self.diarization,
            StageKind::Correction => &mut self.correction,
        }
    }
}

/// Splits `lines` into consecutive chunks of `segment_lines` (the last may be
/// shorter).
///
/// Panics if `segment_lines` is zero.
pub fn segment_transcript<T: Clone>(lines: &[T], segment_lines: usize) -> Vec<Vec<T>> {
    assert!(segment_lines >= 1, "segment_lines must be at least 1");
    lines.chunks(segment_lines).map(<[T]>::to_vec).collect()
}

/// Substitutes the example blocks (joined by blank lines) and the segment
/// lines (joined by newlines) into the template. Placeholder-like text inside
/// the substituted values is left alone.
pub fn render_prompt(
    template: &PromptTemplate,
    examples: &[String],
    segment: &[String],
) -> Result<String, TemplateError> {
    let (e, s) = template.placeholder_positions()?;
    let body = &template.body;
    let mut out = String::with_capacity(body.len() + 256);
    out.push_str(&body[..e]);
    out.push_str(&examples.join("\n\n"));
    out.push_str(&body[e + EXAMPLES_PLACEHOLDER.len()..s]);
    out.push_str(&segment.join("\n"));
    out.push_str(&body[s + SEGMENT_PLACEHOLDER.len()..]);
    Ok(out)
}

/// The follow-up prompt sent after a rejected reply.
pub fn retry_prompt(base: &str, error: &ParseError) -> String {
    format!(
        "{base}\n\nYour previous reply was rejected: {error}. \
         Reply again with only the JSON array in the expected output structure."
    )
}

/// One input line for a stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageLine {
    pub speaker: Option<SpeakerRole>,
    pub text: String,
}

impl StageLine {
    pub fn new(speaker: Option<SpeakerRole>, text: impl Into<String>) -> Self {
        StageLine { speaker, text: text.into() }
    }

    /// Correction prompts show speakers as `Doctor: ...`; the other stages see bare text.
    fn render(&self, stage: StageKind) -> String {
        match (stage, self.speaker) {
            (StageKind::Correction, Some(role)) => format!("{role}: {}", self.text),
            _ => self.text.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageResult {
    pub stage: StageKind,
    pub segment_index: usize,
    pub items: Vec<StageItem>,
    pub retry_count: usize,
    /// Hash of the first-attempt prompt; the cache key for this segment.
    pub prompt_sha256: String,
}

/// Contents of a `.parsed.json` cache file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedRecord {
    pub retry_count: usize,
    /// Hash of the prompt whose reply was accepted.
    pub accepted_prompt_sha256: String,
    pub items: Vec<StageItem>,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{stage} failed on segment {segment}: {reason}{}", last_raw.as_ref().map(|p| format!(" (last reply: {})", p.display())).unwrap_or_default())]
    StageFailed { stage: StageKind, segment: usize, reason: String, last_raw: Option<PathBuf> },
    #[error("cache error: {0}")]
    Cache(#[from] io::Error),
    #[error(transparent)]
    Transcript(#[from] TranscriptError),
}

fn stage_failed(stage: StageKind, segment: usize, reason: impl fmt::Display, last_raw: Option<PathBuf>) -> PipelineError {
    PipelineError::StageFailed { stage, segment, reason: reason.to_string(), last_raw }
}

/// Runs one stage over `lines`, segment by segment.
///
/// For each segment the validated cache entry is used if present. Otherwise
/// each attempt's raw reply is taken from the cache or the client, written to
/// the cache, and only then parsed. Rejected replies are retried up to
/// `cfg.max_retries` times, each rejection appended to the previous prompt.
pub fn run_stage(
    lines: &[StageLine],
    cfg: &StageConfig,
    client: &dyn ChatClient,
    cache: &ResponseCache,
) -> Result<Vec<StageResult>, PipelineError> {
    cfg.validate()?;
    let stage = cfg.stage;
    let model = client.identity();
    let mut results = Vec::new();

    for (segment_index, segment) in segment_transcript(lines, cfg.segment_lines).iter().enumerate() {
        let rendered: Vec<String> = segment.iter().map(|l| l.render(stage)).collect();
        let base = render_prompt(&cfg.template, &cfg.few_shot_examples, &rendered).map_err(ConfigError::from)?;
        let base_sha = sha256_hex(&base);

        if let Some(parsed) = cache.load_parsed(stage, &model, &base_sha)? {
            log::debug!("{stage} segment {segment_index}: cached");
            results.push(StageResult {
                stage,
                segment_index,
                items: parsed.items,
                retry_count: parsed.retry_count,
                prompt_sha256: base_sha,
            });
            continue;
        }

        let mut prompt = base.clone();
        let mut last_raw = None;
        let mut accepted = None;
        for attempt in 0..=cfg.max_retries {
            let sha = sha256_hex(&prompt);
            let reply = match cache.load_raw(stage, &model, &sha)? {
                Some(record) => record.reply,
                None => {
                    let reply = client
                        .send(&prompt, cfg.temperature)
                        .map_err(|e| stage_failed(stage, segment_index, e, last_raw.clone()))?;
                    let record = RawRecord {
                        stage,
                        model: model.clone(),
                        prompt_sha256: sha.clone(),
                        temperature: cfg.temperature,
                        reply,
                    };
                    cache.store_raw(&record)?;
                    record.reply
                }
            };
            last_raw = Some(cache.raw_path(stage, &model, &sha));
            match parse_stage_response(stage, &reply, segment.len()) {
                Ok(items) => {
                    accepted = Some(ParsedRecord { retry_count: attempt, accepted_prompt_sha256: sha, items });
                    break;
                }
                Err(e) if attempt < cfg.max_retries => {
                    log::warn!("{stage} segment {segment_index}: reply rejected ({e}), retrying");
                    prompt = retry_prompt(&prompt, &e);
                }
                Err(e) => {
                    return Err(stage_failed(
                        stage,
                        segment_index,
                        format!("reply rejected after {} retries: {e}", cfg.max_retries),
                        last_raw,
                    ))
                }
            }
        }
        let parsed = accepted.expect("loop either accepts a reply or returns");
        cache.store_parsed(stage, &model, &base_sha, &parsed)?;
        results.push(StageResult {
            stage,
            segment_index,
            items: parsed.items,
            retry_count: parsed.retry_count,
            prompt_sha256: base_sha,
        });
    }
    Ok(results)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageOutput {
    pub stage: StageKind,
    pub results: Vec<StageResult>,
    /// The transcript as it stands after this stage.
    pub transcript: Transcript,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PipelineOutput {
    pub transcript: Transcript,
    pub stages: Vec<StageOutput>,
}

impl PipelineOutput {
    pub fn after(&self, stage: StageKind) -> Option<&Transcript> {
        self.stages.iter().find(|s| s.stage == stage).map(|s| &s.transcript)
    }
}

pub fn check_stage_order(stages: &[StageKind]) -> Result<(), ConfigError> {
    if stages.is_empty() {
        return Err(ConfigError::NoStages);
    }
    if stages.windows(2).any(|w| w[0] >= w[1]) {
        let names: Vec<&str> = stages.iter().map(|s| s.label()).collect();
        return Err(ConfigError::StageOrder(names.join(",")));
    }
    Ok(())
}

fn next_lines(stage: StageKind, input: &[StageLine], results: &[StageResult], segment_lines: usize) -> Vec<StageLine> {
    let mut out = Vec::new();
    for (segment, result) in segment_transcript(input, segment_lines).iter().zip(results) {
        let one_to_one = segment.len() == result.items.len();
        for (i, item) in result.items.iter().enumerate() {
            let carried = if one_to_one { segment[i].speaker } else { None };
            let speaker = match stage {
                StageKind::Punctuation => carried,
                StageKind::Diarization => item.speaker(),
                // Correction keeps the speakers it was given.
                StageKind::Correction => carried.or(item.speaker()),
            };
            out.push(StageLine { speaker, text: item.output_sentence().to_string() });
        }
    }
    out
}

fn rebuild(source: &Transcript, lines: &[StageLine]) -> Result<Transcript, TranscriptError> {
    Transcript::new(
        source.conversation_id.clone(),
        source.dataset_tag.clone(),
        lines.iter().map(|l| (l.speaker.unwrap_or(SpeakerRole::Unknown), l.text.clone())),
    )
}

/// Runs `stages` (a subset of punctuation, diarization, correction, in that
/// order) over the transcript's turns, each stage consuming the previous
/// stage's sentences. Speaker labels from the input are used only where they
/// are known (anything but `Unknown`).
pub fn run_pipeline(
    transcript: &Transcript,
    stages: &[StageKind],
    cfg: &PipelineConfig,
    client: &dyn ChatClient,
    cache: &ResponseCache,
) -> Result<PipelineOutput, PipelineError> {
    check_stage_order(stages)?;
    for &stage in stages {
        cfg.stage(stage).validate()?;
    }
    let mut lines: Vec<StageLine> = transcript
        .turns
        .iter()
        .map(|t| StageLine {
            speaker: (t.speaker != SpeakerRole::Unknown).then_some(t.speaker),
            text: t.text.clone(),
        })
        .collect();

    let mut outputs = Vec::new();
    for &stage in stages {
        let stage_cfg = cfg.stage(stage);
        let results = run_stage(&lines, stage_cfg, client, cache)?;
        lines = next_lines(stage, &lines, &results, stage_cfg.segment_lines);
        outputs.push(StageOutput { stage, results, transcript: rebuild(transcript, &lines)? });
    }
    let last = outputs.last().expect("at least one stage").transcript.clone();
    Ok(PipelineOutput { transcript: last, stages: outputs })
}
