//! The `medscore` command line.
//!
//! Exit codes: 0 success, 2 configuration error, 3 input error, 4 pipeline
//! failure, 5 internal invariant violation.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::concepts::ConceptAnnotation;
use crate::metrics::McWerVariant;
use crate::pipeline::{run_pipeline, ResponseCache, StageKind};
use crate::report::{evaluate, render_report, slug, table, write_file, MetricReport, ReportError, RunConfig};
use crate::transcript::{load_corpus, render_corpus, tokenize_lenient, CorpusFormat, Transcript};

#[derive(Debug, Parser)]
#[command(name = "medscore", version, about = "Score and post-process medical conversation transcripts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Run configuration (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory, overriding the configuration.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Comma-separated pipeline stages, e.g. `punctuation,diarization`.
    #[arg(long, global = true, value_name = "LIST", value_delimiter = ',')]
    pub stages: Option<Vec<StageKind>>,

    /// Medical-concept comparison variant.
    #[arg(long, global = true, value_enum)]
    pub variant: Option<VariantArg>,

    /// Forbid network access; only cached replies and annotations are used.
    #[arg(long, global = true)]
    pub offline: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Lemma,
    Nolemma,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert corpus files to canonical turns JSONL under `<out>/corpus/`.
    Ingest {
        /// A single corpus file; without it, the configured corpora are ingested.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Format of `--input` (`turns-jsonl` or `plain-text`); guessed from the extension if absent.
        #[arg(long)]
        format: Option<CorpusFormat>,
    },
    /// Write concept annotation sidecars under `<out>/annotations/`.
    Annotate,
    /// Run the LLM stages over each hypothesis corpus.
    Pipeline,
    /// Score all hypotheses; writes `report.json` and `tables/scores.csv`.
    Score,
    /// Category deltas and character-difference analysis; writes `analysis.json`.
    Analyze,
    /// Render CSV tables and SVG plots from `<out>/report.json`.
    Report,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Pipeline(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Input(_) => 3,
            CliError::Pipeline(_) => 4,
            CliError::Internal(_) => 5,
        }
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        let message = e.to_string();
        match e {
            ReportError::Config(_) => CliError::Config(message),
            ReportError::Input(_) | ReportError::Io { .. } | ReportError::EmptyReport(_) => CliError::Input(message),
            ReportError::Pipeline(_) => CliError::Pipeline(message),
            ReportError::Internal(_) => CliError::Internal(message),
        }
    }
}

fn absolute(path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        std::env::current_dir().map(|d| d.join(path)).unwrap_or_else(|_| path.to_path_buf())
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config is required for this command".into()))?;
    let mut config = RunConfig::load(path)?;
    if let Some(out) = &cli.out {
        config.output_dir = absolute(out);
    }
    if let Some(v) = cli.variant {
        config.variant = match v {
            VariantArg::Lemma => McWerVariant::Lemmatized,
            VariantArg::Nolemma => McWerVariant::NonLemmatized,
        };
    }
    if let Some(stages) = &cli.stages {
        let pipeline = config
            .pipeline
            .as_mut()
            .ok_or_else(|| CliError::Config("--stages given but the configuration has no pipeline section".into()))?;
        pipeline.stages = stages.clone();
    }
    config.validate()?;
    Ok(config)
}

fn output_dir(cli: &Cli) -> Result<PathBuf, CliError> {
    match (&cli.out, &cli.config) {
        (Some(out), _) => Ok(absolute(out)),
        (None, Some(_)) => Ok(load_config(cli)?.output_dir()),
        (None, None) => Ok(absolute(Path::new("out"))),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Messages go to stdout, errors to stderr.
pub fn run_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(summary) => {
            print!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("medscore: {e}");
            e.exit_code()
        }
    }
}

/// Runs one command and returns its console summary.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Ingest { input, format } => ingest(cli, input.as_deref(), *format),
        Command::Annotate => annotate(cli),
        Command::Pipeline => pipeline(cli),
        Command::Score => score(cli),
        Command::Analyze => analyze(cli),
        Command::Report => report(cli),
    }
}

fn guess_format(path: &Path) -> CorpusFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") | Some("json") => CorpusFormat::TurnsJsonl,
        _ => CorpusFormat::PlainText,
    }
}

fn load(path: &Path, format: CorpusFormat) -> Result<Vec<Transcript>, CliError> {
    load_corpus(path, format).map_err(|e| CliError::Input(e.to_string()))
}

fn ingest(cli: &Cli, input: Option<&Path>, format: Option<CorpusFormat>) -> Result<String, CliError> {
    let mut jobs: Vec<(String, PathBuf, CorpusFormat)> = Vec::new();
    let out = match input {
        Some(path) => {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("corpus").to_string();
            jobs.push((stem, path.to_path_buf(), format.unwrap_or_else(|| guess_format(path))));
            output_dir(cli)?
        }
        None => {
            let config = load_config(cli)?;
            jobs.push(("reference".into(), config.resolve(&config.reference.path), config.reference.format));
            for h in &config.hypotheses {
                jobs.push((slug(&h.system), config.resolve(&h.path), h.format));
            }
            config.output_dir()
        }
    };
    let mut summary = String::new();
    for (name, path, format) in jobs {
        let corpus = load(&path, format)?;
        let target = out.join("corpus").join(format!("{name}.jsonl"));
        write_file(&target, &render_corpus(&corpus, CorpusFormat::TurnsJsonl))?;
        let _ = writeln!(summary, "{}: {} conversations -> {}", path.display(), corpus.len(), target.display());
    }
    Ok(summary)
}

#[derive(Serialize)]
struct AnnotationSidecar<'a> {
    conversation_id: &'a str,
    tokens: &'a [String],
    annotations: Vec<ConceptAnnotation>,
}

fn annotate(cli: &Cli) -> Result<String, CliError> {
    let config = load_config(cli)?;
    let annotator = config.annotator(cli.offline)?;
    let mut jobs = vec![("reference".to_string(), config.resolve(&config.reference.path), config.reference.format)];
    for h in &config.hypotheses {
        jobs.push((slug(&h.system), config.resolve(&h.path), h.format));
    }
    let mut summary = String::new();
    for (name, path, format) in jobs {
        let corpus = load(&path, format)?;
        let mut out = String::new();
        let mut total = 0;
        for t in &corpus {
            let seq = tokenize_lenient(t, &config.normalization);
            let annotations = annotator.annotate(&seq).map_err(|e| CliError::Input(format!("{}: {e}", t.conversation_id)))?;
            total += annotations.len();
            let line = AnnotationSidecar { conversation_id: &t.conversation_id, tokens: &seq.tokens, annotations };
            out.push_str(&serde_json::to_string(&line).map_err(|e| CliError::Internal(e.to_string()))?);
            out.push('\n');
        }
        let target = config.output_dir().join("annotations").join(format!("{name}.jsonl"));
        write_file(&target, &out)?;
        let _ = writeln!(summary, "{name}: {total} concepts in {} conversations -> {}", corpus.len(), target.display());
    }
    Ok(summary)
}

fn pipeline(cli: &Cli) -> Result<String, CliError> {
    let config = load_config(cli)?;
    let settings = config.pipeline_settings()?;
    let pipeline_cfg = config.pipeline_config()?;
    let client = config.chat_client(cli.offline)?;
    let cache = ResponseCache::new(config.cache_dir());
    let identity = client.identity();

    let mut summary = String::new();
    for h in &config.hypotheses {
        let corpus = load(&config.resolve(&h.path), h.format)?;
        let mut per_stage: Vec<Vec<Transcript>> = vec![Vec::new(); settings.stages.len()];
        let mut retries = 0;
        for t in &corpus {
            let output = run_pipeline(t, &settings.stages, &pipeline_cfg, client.as_ref(), &cache)
                .map_err(|e| CliError::Pipeline(format!("{} / {}: {e}", h.system, t.conversation_id)))?;
            for (i, stage) in output.stages.into_iter().enumerate() {
                retries += stage.results.iter().map(|r| r.retry_count).sum::<usize>();
                per_stage[i].push(stage.transcript);
            }
        }
        let dir = config.pipeline_dir(&h.system, &identity);
        for (stage, transcripts) in settings.stages.iter().zip(&per_stage) {
            let target = dir.join(format!("{stage}.jsonl"));
            write_file(&target, &render_corpus(transcripts, CorpusFormat::TurnsJsonl))?;
        }
        let _ = writeln!(
            summary,
            "{} with {identity}: {} conversations, {retries} retries -> {}",
            h.system,
            corpus.len(),
            dir.display()
        );
    }
    Ok(summary)
}

fn score(cli: &Cli) -> Result<String, CliError> {
    let config = load_config(cli)?;
    let report = evaluate(&config, cli.offline)?;
    let out = config.output_dir();
    write_file(&out.join("report.json"), &report.to_json())?;
    write_file(&out.join("tables/scores.csv"), &table::emit_scores(&report))?;
    let mut summary = String::new();
    for a in &report.aggregates {
        let _ = writeln!(
            summary,
            "{} {} {}: WER {} (n={})",
            a.llm.as_deref().unwrap_or(table::NO_LLM),
            a.system,
            a.method,
            table::format_mean_std(a.wer.mean, a.wer.std_dev),
            a.wer.n
        );
    }
    let _ = writeln!(summary, "report written to {}", out.join("report.json").display());
    Ok(summary)
}

fn analyze(cli: &Cli) -> Result<String, CliError> {
    let config = load_config(cli)?;
    let report = evaluate(&config, cli.offline)?;
    let out = config.output_dir();
    let json = serde_json::to_string_pretty(&report.analysis).map_err(|e| CliError::Internal(e.to_string()))? + "\n";
    write_file(&out.join("analysis.json"), &json)?;
    let mut summary = String::new();
    if report.analysis.is_empty() {
        let _ = writeln!(summary, "no corrected transcripts found; run `pipeline` with the correction stage first");
    }
    for s in &report.analysis {
        let c = &s.char_diff;
        let _ = writeln!(
            summary,
            "{} + {}: {} concept substitutions, {} below {} characters, {} of those corrected",
            s.system, s.llm, c.total, c.low_diff, c.threshold, c.low_diff_resolved
        );
        for d in s.category_deltas.iter().take(5) {
            let _ = writeln!(summary, "  {} {}: {}", d.category.label(), d.kind.label(), table::format_delta(d.delta));
        }
    }
    Ok(summary)
}

fn report(cli: &Cli) -> Result<String, CliError> {
    let out = output_dir(cli)?;
    let path = out.join("report.json");
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Input(format!("missing input {}: {e} (run `score` first)", path.display())))?;
    let report = MetricReport::from_json(&text)?;
    let written = render_report(&report, &out)?;
    let mut summary = String::new();
    for p in written {
        let _ = writeln!(summary, "{}", p.display());
    }
    Ok(summary)
}
