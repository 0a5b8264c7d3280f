//! Conversations, text normalization, tokenization and corpus ingestion.
//!
//! A [`Transcript`] is an ordered list of speaker-labeled turns. Scoring
//! works on [`TokenSequence`]s produced by [`tokenize`], where every word
//! remembers the turn and speaker it came from. Turn order is the only
//! temporal axis; no timestamps are involved anywhere.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpeakerRole {
    Doctor,
    Patient,
    /// Undiarized output, e.g. raw ASR text.
    Unknown,
}

impl SpeakerRole {
    pub fn as_str(self) -> &'static str {
        match self {
            SpeakerRole::Doctor => "Doctor",
            SpeakerRole::Patient => "Patient",
            SpeakerRole::Unknown => "Unknown",
        }
    }
}

impl fmt::Display for SpeakerRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SpeakerRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Doctor" => Ok(SpeakerRole::Doctor),
            "Patient" => Ok(SpeakerRole::Patient),
            "Unknown" => Ok(SpeakerRole::Unknown),
            other => Err(format!("unknown speaker label {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    #[serde(skip)]
    pub index: usize,
    pub speaker: SpeakerRole,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub conversation_id: String,
    pub dataset_tag: String,
    pub turns: Vec<Turn>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TranscriptError {
    #[error("conversation {0:?} has no turns")]
    NoTurns(String),
    #[error("conversation {conversation_id:?}: turn {turn} is blank")]
    BlankTurn { conversation_id: String, turn: usize },
    #[error("conversation {conversation_id:?}: turn indices are not contiguous at position {position}")]
    BadTurnIndex { conversation_id: String, position: usize },
    #[error("every turn of conversation {0:?} normalizes to the empty string")]
    EmptyAfterNormalization(String),
}

impl Transcript {
    /// Builds a transcript from `(speaker, text)` pairs, numbering turns from 0.
    pub fn new<I, S>(
        conversation_id: impl Into<String>,
        dataset_tag: impl Into<String>,
        turns: I,
    ) -> Result<Self, TranscriptError>
    where
        I: IntoIterator<Item = (SpeakerRole, S)>,
        S: Into<String>,
    {
        let transcript = Transcript {
            conversation_id: conversation_id.into(),
            dataset_tag: dataset_tag.into(),
            turns: turns
                .into_iter()
                .enumerate()
                .map(|(index, (speaker, text))| Turn { index, speaker, text: text.into() })
                .collect(),
        };
        transcript.validate()?;
        Ok(transcript)
    }

    pub fn validate(&self) -> Result<(), TranscriptError> {
        if self.turns.is_empty() {
            return Err(TranscriptError::NoTurns(self.conversation_id.clone()));
        }
        for (position, turn) in self.turns.iter().enumerate() {
            if turn.index != position {
                return Err(TranscriptError::BadTurnIndex {
                    conversation_id: self.conversation_id.clone(),
                    position,
                });
            }
            if turn.text.trim().is_empty() {
                return Err(TranscriptError::BlankTurn {
                    conversation_id: self.conversation_id.clone(),
                    turn: position,
                });
            }
        }
        Ok(())
    }

    /// Turn texts in order, one per line.
    pub fn lines(&self) -> Vec<String> {
        self.turns.iter().map(|t| t.text.clone()).collect()
    }

    fn renumber(&mut self) {
        for (index, turn) in self.turns.iter_mut().enumerate() {
            turn.index = index;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationConfig {
    pub lowercase: bool,
    pub strip_punctuation: bool,
    pub unicode_compatibility_fold: bool,
    /// Rewrite the digits 0-20 as English words. Off by default: numbers are
    /// compared as written.
    #[serde(default)]
    pub spell_out_numbers: bool,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        NormalizationConfig {
            lowercase: true,
            strip_punctuation: true,
            unicode_compatibility_fold: true,
            spell_out_numbers: false,
        }
    }
}

const NUMBER_WORDS: [&str; 21] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven",
    "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen",
    "twenty",
];

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || is_combining_mark(c)
}

fn is_joiner(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '-' | '\u{2010}' | '\u{2011}')
}

fn normalize_once(raw: &str, cfg: &NormalizationConfig) -> String {
    let mut text: String = if cfg.unicode_compatibility_fold {
        raw.nfkc().collect()
    } else {
        raw.to_string()
    };
    if cfg.lowercase {
        text = text.to_lowercase();
        if cfg.unicode_compatibility_fold {
            text = text.nfkc().collect();
        }
    }

    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    for (i, &c) in chars.iter().enumerate() {
        if c.is_whitespace() {
            out.push(' ');
        } else if !cfg.strip_punctuation || is_word_char(c) {
            out.push(c);
        } else if is_joiner(c) {
            let before = i > 0 && is_word_char(chars[i - 1]);
            let after = chars.get(i + 1).is_some_and(|&n| is_word_char(n));
            if before && after {
                out.push(c);
            }
        }
    }

    let mut words = out.split_whitespace().map(str::to_string).collect::<Vec<_>>();
    if cfg.spell_out_numbers {
        for word in &mut words {
            if let Ok(n) = word.parse::<usize>() {
                if let Some(name) = NUMBER_WORDS.get(n) {
                    if word.len() == 1 || !word.starts_with('0') {
                        *word = (*name).to_string();
                    }
                }
            }
        }
    }
    words.join(" ")
}

/// Normalizes an utterance for word-level comparison.
///
/// Applies compatibility folding, lowercasing and punctuation stripping
/// (apostrophes and hyphens between word characters survive), then
/// collapses whitespace. The steps are repeated until the output is stable,
/// so the function is idempotent even when folding and case mapping
/// interact.
pub fn normalize_text(raw: &str, cfg: &NormalizationConfig) -> String {
    let mut current = normalize_once(raw, cfg);
    for _ in 0..8 {
        let next = normalize_once(&current, cfg);
        if next == current {
            break;
        }
        current = next;
    }
    current
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenOrigin {
    pub turn: usize,
    pub speaker: SpeakerRole,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    pub origin: Vec<TokenOrigin>,
}

impl TokenSequence {
    /// Splits already-normalized text on whitespace; every token is attributed
    /// to turn 0 with an unknown speaker.
    pub fn from_text(text: &str) -> Self {
        Self::from_words(text.split_whitespace(), SpeakerRole::Unknown)
    }

    pub fn from_words<I, S>(words: I, speaker: SpeakerRole) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = words.into_iter().map(Into::into).collect();
        let origin = vec![TokenOrigin { turn: 0, speaker }; tokens.len()];
        TokenSequence { tokens, origin }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn join(&self, range: std::ops::Range<usize>) -> String {
        self.tokens[range].join(" ")
    }

    /// Keeps only the tokens spoken by `role`, in order.
    pub fn filter_role(&self, role: SpeakerRole) -> TokenSequence {
        let (tokens, origin) = self
            .tokens
            .iter()
            .zip(&self.origin)
            .filter(|(_, o)| o.speaker == role)
            .map(|(t, o)| (t.clone(), *o))
            .unzip();
        TokenSequence { tokens, origin }
    }

    fn push_turn(&mut self, turn: &Turn, cfg: &NormalizationConfig) {
        for word in normalize_text(&turn.text, cfg).split_whitespace() {
            self.tokens.push(word.to_string());
            self.origin.push(TokenOrigin { turn: turn.index, speaker: turn.speaker });
        }
    }
}

/// Tokenizes a transcript in turn order.
pub fn tokenize(
    transcript: &Transcript,
    cfg: &NormalizationConfig,
) -> Result<TokenSequence, TranscriptError> {
    let seq = tokenize_lenient(transcript, cfg);
    if seq.is_empty() {
        return Err(TranscriptError::EmptyAfterNormalization(transcript.conversation_id.clone()));
    }
    Ok(seq)
}

/// Like [`tokenize`] but returns an empty sequence instead of failing.
pub fn tokenize_lenient(transcript: &Transcript, cfg: &NormalizationConfig) -> TokenSequence {
    let mut seq = TokenSequence::default();
    for turn in &transcript.turns {
        seq.push_turn(turn, cfg);
    }
    seq
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusFormat {
    TurnsJsonl,
    PlainText,
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "turns-jsonl" => Ok(CorpusFormat::TurnsJsonl),
            "plain-text" => Ok(CorpusFormat::PlainText),
            other => Err(format!("unknown corpus format {other:?}")),
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}:{line}: {message}")]
    Format { path: PathBuf, line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CorpusError {
    fn format(path: &Path, line: usize, message: impl Into<String>) -> Self {
        CorpusError::Format { path: path.to_path_buf(), line, message: message.into() }
    }
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<Transcript>, CorpusError> {
    let content = fs::read_to_string(path)
        .map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
    let corpus = match format {
        CorpusFormat::TurnsJsonl => parse_jsonl(path, &content)?,
        CorpusFormat::PlainText => parse_plain_text(path, &content)?,
    };
    if corpus.is_empty() {
        log::warn!("{}: corpus is empty", path.display());
    }
    Ok(corpus)
}

fn check_transcript(
    path: &Path,
    line: usize,
    transcript: &Transcript,
    seen: &mut HashSet<String>,
) -> Result<(), CorpusError> {
    transcript.validate().map_err(|e| CorpusError::format(path, line, e.to_string()))?;
    if !seen.insert(transcript.conversation_id.clone()) {
        return Err(CorpusError::format(
            path,
            line,
            format!("duplicate conversation_id {:?}", transcript.conversation_id),
        ));
    }
    Ok(())
}

fn parse_jsonl(path: &Path, content: &str) -> Result<Vec<Transcript>, CorpusError> {
    let mut corpus = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in content.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut transcript: Transcript = serde_json::from_str(line)
            .map_err(|e| CorpusError::format(path, line_no, e.to_string()))?;
        transcript.renumber();
        check_transcript(path, line_no, &transcript, &mut seen)?;
        corpus.push(transcript);
    }
    Ok(corpus)
}

fn parse_plain_text(path: &Path, content: &str) -> Result<Vec<Transcript>, CorpusError> {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("corpus").to_string();
    let mut corpus = Vec::new();
    let mut seen = HashSet::new();
    let mut current: Vec<(SpeakerRole, String)> = Vec::new();
    let mut start_line = 1;

    let mut flush = |turns: &mut Vec<(SpeakerRole, String)>, line: usize| -> Result<(), CorpusError> {
        if turns.is_empty() {
            return Ok(());
        }
        let id = format!("{stem}-{:03}", corpus.len() + 1);
        let transcript = Transcript::new(id, stem.clone(), turns.drain(..))
            .map_err(|e| CorpusError::format(path, line, e.to_string()))?;
        check_transcript(path, line, &transcript, &mut seen)?;
        corpus.push(transcript);
        Ok(())
    };

    for (i, line) in content.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            flush(&mut current, start_line)?;
            continue;
        }
        if current.is_empty() {
            start_line = line_no;
        }
        let (label, text) = line
            .split_once(':')
            .ok_or_else(|| CorpusError::format(path, line_no, "expected \"Speaker: text\""))?;
        let speaker: SpeakerRole =
            label.trim().parse().map_err(|e: String| CorpusError::format(path, line_no, e))?;
        let text = text.trim();
        if text.is_empty() {
            return Err(CorpusError::format(path, line_no, "blank turn"));
        }
        current.push((speaker, text.to_string()));
    }
    flush(&mut current, start_line)?;
    Ok(corpus)
}

/// Renders a corpus in the given format. Plain text drops conversation ids and
/// dataset tags, which are regenerated from the file name on load.
pub fn render_corpus(corpus: &[Transcript], format: CorpusFormat) -> String {
    let mut out = String::new();
    match format {
        CorpusFormat::TurnsJsonl => {
            for transcript in corpus {
                out.push_str(&serde_json::to_string(transcript).expect("transcript serializes"));
                out.push('\n');
            }
        }
        CorpusFormat::PlainText => {
            for (i, transcript) in corpus.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                for turn in &transcript.turns {
                    out.push_str(&format!("{}: {}\n", turn.speaker, turn.text.trim()));
                }
            }
        }
    }
    out
}

pub fn write_corpus(path: &Path, corpus: &[Transcript], format: CorpusFormat) -> Result<(), CorpusError> {
    let io = |source| CorpusError::Io { path: path.to_path_buf(), source };
    let mut file = fs::File::create(path).map_err(io)?;
    file.write_all(render_corpus(corpus, format).as_bytes()).map_err(io)
}
