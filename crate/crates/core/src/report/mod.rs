//! Run configuration, corpus-level scoring and report emission.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    char_diff_report, deltas_from_counts, merge_category_counts, substitution_records, CategoryDelta,
    SubstitutionRecord, LOW_DIFF_THRESHOLD,
};
use crate::concepts::{Annotator, ConceptDictionary, DictionaryAnnotator, ExternalAnnotator, Secret};
use crate::metrics::{
    compute_mc_wer, compute_speaker_wer, compute_wer, rate_to_f64, summarize, DistributionSummary, McWerResult,
    McWerVariant,
};
use crate::pipeline::{
    ChatClient, HttpChatClient, MockChatClient, ModelIdentity, OfflineClient, PipelineConfig, PipelineError,
    PromptTemplate, ProviderKind, StageKind,
};
use crate::transcript::{load_corpus, tokenize, tokenize_lenient, CorpusFormat, NormalizationConfig, Transcript};
use crate::util::sha256_hex;

pub mod svg;
pub mod table;

pub use table::{emit_table, format_mean_std, format_percent, table_groups, TableGroup, TableMetric};

pub const SCHEMA_VERSION: &str = "medscore-report/1";

/// JSON schema every `report.json` validates against.
pub const REPORT_SCHEMA: &str = include_str!("../../data/report.schema.json");

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("empty report: {0}")]
    EmptyReport(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ReportError {
    pub(crate) fn io(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
        move |source| ReportError::Io { path: path.to_path_buf(), source }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusInput {
    pub path: PathBuf,
    pub format: CorpusFormat,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesisInput {
    /// ASR system label, e.g. `Whisper`.
    pub system: String,
    pub path: PathBuf,
    pub format: CorpusFormat,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnnotatorSettings {
    /// Bundled dictionary unless `path` names another CSV.
    Dictionary {
        #[serde(default)]
        path: Option<PathBuf>,
    },
    External {
        endpoint: String,
        #[serde(default = "default_credentials_env")]
        credentials_env: String,
        /// Defaults to `<output_dir>/annotations-cache`.
        #[serde(default)]
        cache_dir: Option<PathBuf>,
    },
}

fn default_credentials_env() -> String {
    crate::concepts::DEFAULT_CREDENTIALS_ENV.to_string()
}

impl Default for AnnotatorSettings {
    fn default() -> Self {
        AnnotatorSettings::Dictionary { path: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderChoice {
    /// Replays recorded replies from `fixtures`.
    Mock,
    OpenaiCompatible,
    Anthropic,
    Gemini,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderSettings {
    pub kind: ProviderChoice,
    /// Also the LLM label in tables.
    pub model: String,
    #[serde(default)]
    pub endpoint: Option<String>,
    /// Environment variable holding the API key.
    #[serde(default)]
    pub api_key_env: Option<String>,
    /// Fixture directory for the mock provider.
    #[serde(default)]
    pub fixtures: Option<PathBuf>,
}

impl ProviderSettings {
    pub fn identity(&self) -> ModelIdentity {
        let provider = match self.kind {
            ProviderChoice::Mock => "mock",
            ProviderChoice::OpenaiCompatible => "openai",
            ProviderChoice::Anthropic => "anthropic",
            ProviderChoice::Gemini => "gemini",
        };
        ModelIdentity::new(provider, self.model.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSettings {
    #[serde(default = "all_stages")]
    pub stages: Vec<StageKind>,
    #[serde(default = "default_segment_lines")]
    pub segment_lines: usize,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_retries")]
    pub max_retries: usize,
    /// Directory with `<stage>.txt` templates overriding the bundled ones.
    #[serde(default)]
    pub template_dir: Option<PathBuf>,
    /// Directory with `<stage>.json` example arrays overriding the bundled ones.
    #[serde(default)]
    pub examples_dir: Option<PathBuf>,
    pub provider: ProviderSettings,
}

fn all_stages() -> Vec<StageKind> {
    StageKind::ALL.to_vec()
}
fn default_segment_lines() -> usize {
    10
}
fn default_retries() -> usize {
    2
}
fn default_variant() -> McWerVariant {
    McWerVariant::Lemmatized
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub reference: CorpusInput,
    pub hypotheses: Vec<HypothesisInput>,
    #[serde(default)]
    pub normalization: NormalizationConfig,
    #[serde(default)]
    pub annotator: AnnotatorSettings,
    #[serde(default)]
    pub pipeline: Option<PipelineSettings>,
    #[serde(default = "default_variant")]
    pub variant: McWerVariant,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Defaults to `<output_dir>/cache`.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    /// Reserved; nothing is random by default.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Relative paths are resolved against this directory (the config file's).
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ReportError> {
        let text = fs::read_to_string(path).map_err(|e| ReportError::Config(format!("{}: {e}", path.display())))?;
        let mut config: RunConfig =
            serde_json::from_str(&text).map_err(|e| ReportError::Config(format!("{}: {e}", path.display())))?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ReportError> {
        if self.hypotheses.is_empty() {
            return Err(ReportError::Config("no hypotheses configured".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for h in &self.hypotheses {
            if h.system.trim().is_empty() || !seen.insert(h.system.as_str()) {
                return Err(ReportError::Config(format!("hypothesis system label {:?} is blank or repeated", h.system)));
            }
        }
        if let Some(p) = &self.pipeline {
            self.pipeline_config()?;
            crate::pipeline::check_stage_order(&p.stages).map_err(|e| ReportError::Config(e.to_string()))?;
            if p.provider.kind == ProviderChoice::Mock && p.provider.fixtures.is_none() {
                return Err(ReportError::Config("mock provider needs a fixtures directory".into()));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn cache_dir(&self) -> PathBuf {
        match &self.cache_dir {
            Some(dir) => self.resolve(dir),
            None => self.output_dir().join("cache"),
        }
    }

    /// Where `pipeline` writes, and `score` looks for, a system's stage outputs.
    pub fn pipeline_dir(&self, system: &str, llm: &ModelIdentity) -> PathBuf {
        self.output_dir().join("pipeline").join(slug(system)).join(llm.slug())
    }

    pub fn pipeline_settings(&self) -> Result<&PipelineSettings, ReportError> {
        self.pipeline.as_ref().ok_or_else(|| ReportError::Config("no pipeline section in the run configuration".into()))
    }

    pub fn pipeline_config(&self) -> Result<PipelineConfig, ReportError> {
        let settings = self.pipeline_settings()?;
        let mut cfg = PipelineConfig::default();
        for stage in StageKind::ALL {
            let sc = cfg.stage_mut(stage);
            sc.segment_lines = settings.segment_lines;
            sc.temperature = settings.temperature;
            sc.max_retries = settings.max_retries;
            if let Some(dir) = &settings.template_dir {
                let path = self.resolve(dir).join(format!("{stage}.txt"));
                let body = fs::read_to_string(&path).map_err(|e| ReportError::Config(format!("{}: {e}", path.display())))?;
                sc.template = PromptTemplate::new(stage, body.trim_end_matches('\n'))
                    .map_err(|e| ReportError::Config(format!("{}: {e}", path.display())))?;
            }
            if let Some(dir) = &settings.examples_dir {
                let path = self.resolve(dir).join(format!("{stage}.json"));
                let text = fs::read_to_string(&path).map_err(|e| ReportError::Config(format!("{}: {e}", path.display())))?;
                sc.few_shot_examples =
                    serde_json::from_str(&text).map_err(|e| ReportError::Config(format!("{}: {e}", path.display())))?;
            }
            sc.validate().map_err(|e| ReportError::Config(format!("{stage}: {e}")))?;
        }
        Ok(cfg)
    }

    /// The configured chat client. With `offline`, network providers are
    /// replaced by a client that refuses every request, so only cached replies
    /// can be used.
    pub fn chat_client(&self, offline: bool) -> Result<Box<dyn ChatClient>, ReportError> {
        let p = &self.pipeline_settings()?.provider;
        let identity = p.identity();
        let kind = match p.kind {
            ProviderChoice::Mock => {
                let dir = self.resolve(p.fixtures.as_deref().expect("validated"));
                let mock = MockChatClient::from_dir(identity, &dir)
                    .map_err(|e| ReportError::Config(format!("fixtures {}: {e}", dir.display())))?;
                return Ok(Box::new(mock));
            }
            ProviderChoice::OpenaiCompatible => ProviderKind::OpenaiCompatible,
            ProviderChoice::Anthropic => ProviderKind::Anthropic,
            ProviderChoice::Gemini => ProviderKind::Gemini,
        };
        if offline {
            return Ok(Box::new(OfflineClient(identity)));
        }
        let (env, endpoint) = match kind {
            ProviderKind::OpenaiCompatible => ("OPENAI_API_KEY", "https://api.openai.com/v1/chat/completions"),
            ProviderKind::Anthropic => ("ANTHROPIC_API_KEY", "https://api.anthropic.com/v1/messages"),
            ProviderKind::Gemini => (
                "GEMINI_API_KEY",
                "https://generativelanguage.googleapis.com/v1beta/models/{model}:generateContent",
            ),
        };
        let env = p.api_key_env.as_deref().unwrap_or(env);
        let key = Secret::from_env(env).map_err(|e| ReportError::Config(e.to_string()))?;
        let endpoint = p.endpoint.clone().unwrap_or_else(|| endpoint.to_string());
        Ok(Box::new(HttpChatClient::new(kind, endpoint, p.model.clone(), key)))
    }

    pub fn annotator(&self, offline: bool) -> Result<Box<dyn Annotator>, ReportError> {
        match &self.annotator {
            AnnotatorSettings::Dictionary { path: None } => Ok(Box::new(DictionaryAnnotator::bundled())),
            AnnotatorSettings::Dictionary { path: Some(path) } => {
                let path = self.resolve(path);
                let dict = ConceptDictionary::load(&path, self.normalization)
                    .map_err(|e| ReportError::Config(format!("dictionary {}: {e}", path.display())))?;
                Ok(Box::new(DictionaryAnnotator::new(dict)))
            }
            AnnotatorSettings::External { endpoint, credentials_env, cache_dir } => {
                let credentials = if offline {
                    Secret::new("")
                } else {
                    Secret::from_env(credentials_env).map_err(|e| ReportError::Config(e.to_string()))?
                };
                let cache = match cache_dir {
                    Some(dir) => self.resolve(dir),
                    None => self.output_dir().join("annotations-cache"),
                };
                let mut ext = ExternalAnnotator::new(endpoint.clone(), credentials, cache);
                ext.offline = offline;
                Ok(Box::new(ext))
            }
        }
    }
}

/// Lowercase, path-safe version of a label.
pub(crate) fn slug(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c.to_ascii_lowercase() } else { '_' })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ASR")]
    Asr,
    Diarized,
    Corrected,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Asr => "ASR",
            Method::Diarized => "Diarized",
            Method::Corrected => "Corrected",
        }
    }

    /// The method label for the transcript produced by `stage`, if it is scored.
    pub fn after_stage(stage: StageKind) -> Option<Method> {
        match stage {
            StageKind::Punctuation => None,
            StageKind::Diarization => Some(Method::Diarized),
            StageKind::Correction => Some(Method::Corrected),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputHash {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub conversation_id: String,
    pub system: String,
    pub llm: Option<String>,
    pub method: Method,
    pub wer: f64,
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub reference_words: usize,
    /// `None` when the reference conversation has no concepts.
    pub mc_wer: Option<f64>,
    pub concept_substitutions: usize,
    pub concept_deletions: usize,
    pub concept_insertions: usize,
    pub concepts: usize,
    /// Per speaker role; empty when the hypothesis is not diarized.
    pub speaker_wer: BTreeMap<String, f64>,
    pub diarization_error_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub llm: Option<String>,
    pub system: String,
    pub method: Method,
    pub wer: DistributionSummary,
    pub mc_wer: Option<DistributionSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharDiffSection {
    pub threshold: usize,
    pub total: usize,
    pub low_diff: usize,
    pub low_diff_resolved: usize,
    pub low_diff_fraction: Option<f64>,
    pub resolved_fraction: Option<f64>,
    pub substitutions: Vec<SubstitutionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSection {
    pub system: String,
    pub llm: String,
    /// Conversations scored both before and after correction.
    pub conversations: usize,
    pub category_deltas: Vec<CategoryDelta>,
    pub char_diff: CharDiffSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub schema_version: String,
    pub config: RunConfig,
    pub annotator: String,
    pub variant: McWerVariant,
    pub inputs: Vec<InputHash>,
    pub rows: Vec<ReportRow>,
    pub aggregates: Vec<AggregateRow>,
    pub analysis: Vec<AnalysisSection>,
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        serde_json::from_str(text).map_err(|e| ReportError::Input(format!("report.json: {e}")))
    }
}

struct Scored {
    row: ReportRow,
    mc: McWerResult,
}

fn display_path(config: &RunConfig, path: &Path) -> String {
    path.strip_prefix(&config.base_dir).unwrap_or(path).to_string_lossy().replace('\\', "/")
}

fn load_hashed(
    config: &RunConfig,
    role: String,
    path: &Path,
    format: CorpusFormat,
    inputs: &mut Vec<InputHash>,
) -> Result<Vec<Transcript>, ReportError> {
    let bytes = fs::read(path).map_err(|e| ReportError::Input(format!("{}: {e}", path.display())))?;
    inputs.push(InputHash { role, path: display_path(config, path), sha256: sha256_hex(&bytes) });
    load_corpus(path, format).map_err(|e| ReportError::Input(e.to_string()))
}

fn score_pair(
    reference: &Transcript,
    hypothesis: &Transcript,
    annotator: &dyn Annotator,
    config: &RunConfig,
) -> Result<(ReportRow, McWerResult), ReportError> {
    let norm = &config.normalization;
    let input = |e: &dyn fmt::Display| ReportError::Input(format!("conversation {}: {e}", reference.conversation_id));
    let ref_seq = tokenize(reference, norm).map_err(|e| input(&e))?;
    let hyp_seq = tokenize_lenient(hypothesis, norm);
    let wer = compute_wer(&ref_seq, &hyp_seq).map_err(|e| input(&e))?;
    let ref_ann = annotator.annotate(&ref_seq).map_err(|e| input(&e))?;
    let hyp_ann = annotator.annotate(&hyp_seq).map_err(|e| input(&e))?;
    let mc = compute_mc_wer(&ref_seq, &hyp_seq, &ref_ann, &hyp_ann, config.variant)
        .map_err(|e| ReportError::Internal(format!("conversation {}: {e}", reference.conversation_id)))?;
    let speaker = compute_speaker_wer(reference, hypothesis, norm).ok();
    let row = ReportRow {
        conversation_id: reference.conversation_id.clone(),
        system: String::new(),
        llm: None,
        method: Method::Asr,
        wer: wer.value(),
        substitutions: wer.counts.substitutions,
        deletions: wer.counts.deletions,
        insertions: wer.counts.insertions,
        reference_words: wer.counts.reference_len,
        mc_wer: mc.value(),
        concept_substitutions: mc.counts.substitutions,
        concept_deletions: mc.counts.deletions,
        concept_insertions: mc.counts.insertions,
        concepts: mc.counts.concepts,
        speaker_wer: speaker
            .as_ref()
            .map(|s| s.per_role.iter().map(|(role, w)| (role.to_string(), w.value())).collect())
            .unwrap_or_default(),
        diarization_error_rate: speaker.as_ref().and_then(|s| s.diarization_error_rate()).map(|r| rate_to_f64(&r)),
    };
    Ok((row, mc))
}

/// Scores every configured hypothesis system, plus any pipeline outputs found
/// under the output directory, against the reference corpus.
pub fn evaluate(config: &RunConfig, offline: bool) -> Result<MetricReport, ReportError> {
    let mut inputs = Vec::new();
    let reference_path = config.resolve(&config.reference.path);
    let references = load_hashed(config, "reference".into(), &reference_path, config.reference.format, &mut inputs)?;
    if references.is_empty() {
        return Err(ReportError::Input(format!("reference corpus {} is empty", reference_path.display())));
    }
    let annotator = config.annotator(offline)?;
    let llm = config.pipeline.as_ref().map(|p| p.provider.identity());

    let mut scored: Vec<Scored> = Vec::new();
    for hyp_input in &config.hypotheses {
        let mut sources: Vec<(Option<String>, Method, Vec<Transcript>)> = Vec::new();
        let path = config.resolve(&hyp_input.path);
        let role = format!("hypothesis:{}", hyp_input.system);
        sources.push((None, Method::Asr, load_hashed(config, role, &path, hyp_input.format, &mut inputs)?));
        if let Some(llm) = &llm {
            let dir = config.pipeline_dir(&hyp_input.system, llm);
            for stage in StageKind::ALL {
                let (Some(method), path) = (Method::after_stage(stage), dir.join(format!("{stage}.jsonl"))) else {
                    continue;
                };
                if path.is_file() {
                    let role = format!("pipeline:{}:{}:{stage}", hyp_input.system, llm.model);
                    let corpus = load_hashed(config, role, &path, CorpusFormat::TurnsJsonl, &mut inputs)?;
                    sources.push((Some(llm.model.clone()), method, corpus));
                }
            }
        }

        for (llm_label, method, corpus) in sources {
            let by_id: HashMap<&str, &Transcript> = corpus.iter().map(|t| (t.conversation_id.as_str(), t)).collect();
            for reference in &references {
                let Some(hypothesis) = by_id.get(reference.conversation_id.as_str()) else {
                    log::warn!(
                        "{} {method}: no hypothesis for conversation {}",
                        hyp_input.system,
                        reference.conversation_id
                    );
                    continue;
                };
                let (mut row, mc) = score_pair(reference, hypothesis, annotator.as_ref(), config)?;
                row.system = hyp_input.system.clone();
                row.llm = llm_label.clone();
                row.method = method;
                scored.push(Scored { row, mc });
            }
        }
    }
    if scored.is_empty() {
        return Err(ReportError::EmptyReport("no hypothesis conversation matched a reference conversation".into()));
    }

    let aggregates = aggregate(&scored)?;
    let analysis = analyze(&scored)?;
    Ok(MetricReport {
        schema_version: SCHEMA_VERSION.to_string(),
        config: config.clone(),
        annotator: annotator.name().to_string(),
        variant: config.variant,
        inputs,
        rows: scored.into_iter().map(|s| s.row).collect(),
        aggregates,
        analysis,
    })
}

type GroupKey = (String, Option<String>, Method);

fn aggregate(scored: &[Scored]) -> Result<Vec<AggregateRow>, ReportError> {
    let mut groups: BTreeMap<GroupKey, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for s in scored {
        let g = groups.entry((s.row.system.clone(), s.row.llm.clone(), s.row.method)).or_default();
        g.0.push(s.row.wer);
        g.1.extend(s.row.mc_wer);
    }
    groups
        .into_iter()
        .map(|((system, llm, method), (wer, mc))| {
            let wer = summarize(&wer).map_err(|e| ReportError::Internal(e.to_string()))?;
            let mc_wer = (!mc.is_empty())
                .then(|| summarize(&mc))
                .transpose()
                .map_err(|e| ReportError::Internal(e.to_string()))?;
            Ok(AggregateRow { llm, system, method, wer, mc_wer })
        })
        .collect()
}

fn analyze(scored: &[Scored]) -> Result<Vec<AnalysisSection>, ReportError> {
    let mut pairs: BTreeMap<(String, String), Vec<(&McWerResult, &McWerResult)>> = BTreeMap::new();
    let asr: HashMap<(&str, &str), &McWerResult> = scored
        .iter()
        .filter(|s| s.row.method == Method::Asr)
        .map(|s| ((s.row.system.as_str(), s.row.conversation_id.as_str()), &s.mc))
        .collect();
    for s in scored.iter().filter(|s| s.row.method == Method::Corrected) {
        if let (Some(llm), Some(before)) = (&s.row.llm, asr.get(&(s.row.system.as_str(), s.row.conversation_id.as_str()))) {
            pairs.entry((s.row.system.clone(), llm.clone())).or_default().push((before, &s.mc));
        }
    }

    let mut sections = Vec::new();
    for ((system, llm), list) in pairs {
        let before = merge_category_counts(list.iter().map(|(b, _)| *b));
        let after = merge_category_counts(list.iter().map(|(_, a)| *a));
        let mut subs = Vec::new();
        for (b, a) in &list {
            subs.extend(substitution_records(b, a).map_err(|e| ReportError::Internal(e.to_string()))?);
        }
        let r = char_diff_report(&subs, LOW_DIFF_THRESHOLD);
        sections.push(AnalysisSection {
            system,
            llm,
            conversations: list.len(),
            category_deltas: deltas_from_counts(&before, &after),
            char_diff: CharDiffSection {
                threshold: r.threshold,
                total: r.total,
                low_diff: r.low_diff,
                low_diff_resolved: r.low_diff_resolved,
                low_diff_fraction: r.low_diff_fraction.as_ref().map(rate_to_f64),
                resolved_fraction: r.resolved_fraction.as_ref().map(rate_to_f64),
                substitutions: subs,
            },
        });
    }
    Ok(sections)
}

/// Writes `content` to `path`, creating parent directories.
pub(crate) fn write_file(path: &Path, content: &str) -> Result<(), ReportError> {
    crate::util::atomic_write(path, content.as_bytes()).map_err(ReportError::io(path))
}

/// Writes the CSV tables and SVG plots for `report` under `out_dir` and
/// returns the files written, in order.
pub fn render_report(report: &MetricReport, out_dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    if report.rows.is_empty() {
        return Err(ReportError::EmptyReport("report has no rows; run `score` first".into()));
    }
    let mut files: Vec<(PathBuf, String)> = vec![
        (out_dir.join("tables/wer.csv"), emit_table(&table_groups(report, TableMetric::Wer))?),
        (out_dir.join("tables/scores.csv"), table::emit_scores(report)),
        (out_dir.join("tables/category_deltas.csv"), table::emit_deltas(report)),
        (out_dir.join("tables/char_diff.csv"), table::emit_char_diff(report)),
    ];
    let mc_groups = table_groups(report, TableMetric::McWer);
    if mc_groups.iter().any(|g| !g.values.is_empty()) {
        files.push((out_dir.join("tables/mc_wer.csv"), emit_table(&mc_groups)?));
    }
    files.push((out_dir.join("plots/wer.svg"), svg::distribution_plot("WER by system and method", &table_groups(report, TableMetric::Wer))));
    files.push((out_dir.join("plots/mc_wer.svg"), svg::distribution_plot("MC-WER by system and method", &mc_groups)));
    for role in ["Doctor", "Patient"] {
        let groups = table_groups(report, TableMetric::Speaker(role.to_string()));
        if groups.iter().any(|g| !g.values.is_empty()) {
            let name = format!("plots/wer_{}.svg", role.to_ascii_lowercase());
            files.push((out_dir.join(name), svg::distribution_plot(&format!("{role} WER"), &groups)));
        }
    }
    for section in &report.analysis {
        let stem = format!("{}_{}", slug(&section.system), slug(&section.llm));
        files.push((
            out_dir.join(format!("plots/category_deltas_{stem}.svg")),
            svg::signed_bars(&format!("Concept error change, {} + {}", section.system, section.llm), &section.category_deltas),
        ));
    }
    if !report.analysis.is_empty() {
        files.push((out_dir.join("plots/char_diff.svg"), svg::char_diff_bars(&report.analysis)));
    }

    let mut written = Vec::new();
    for (path, content) in files {
        write_file(&path, &content)?;
        written.push(path);
    }
    Ok(written)
}
