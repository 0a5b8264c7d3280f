//! Chat model clients.

use std::cell::RefCell;
use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::cache::RawRecord;
use super::{PromptTemplate, StageKind};
use crate::concepts::Secret;
use crate::util::{post_json, sha256_hex};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelIdentity {
    pub provider: String,
    pub model: String,
}

impl ModelIdentity {
    pub fn new(provider: impl Into<String>, model: impl Into<String>) -> Self {
        ModelIdentity { provider: provider.into(), model: model.into() }
    }

    /// Directory-safe label, e.g. `openai_gpt-4o`.
    pub fn slug(&self) -> String {
        format!("{}_{}", self.provider, self.model)
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' })
            .collect()
    }
}

impl fmt::Display for ModelIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.provider, self.model)
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ChatError {
    #[error("no recorded reply for prompt {prompt_sha256}")]
    NoFixture { prompt_sha256: String },
    #[error("network access is disabled")]
    Offline,
    #[error("provider returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("{0}")]
    Transport(String),
    #[error("unexpected provider response: {0}")]
    BadResponse(String),
}

pub trait ChatClient {
    fn identity(&self) -> ModelIdentity;

    fn send(&self, prompt: &str, temperature: f64) -> Result<String, ChatError>;
}

/// Replays replies recorded in the cache layout, keyed by prompt hash.
#[derive(Debug, Clone)]
pub struct MockChatClient {
    identity: ModelIdentity,
    replies: HashMap<String, String>,
}

impl MockChatClient {
    pub fn new(identity: ModelIdentity) -> Self {
        MockChatClient { identity, replies: HashMap::new() }
    }

    pub fn with_reply(mut self, prompt: &str, reply: impl Into<String>) -> Self {
        self.replies.insert(sha256_hex(prompt), reply.into());
        self
    }

    /// Loads every raw reply file below `dir`.
    pub fn from_dir(identity: ModelIdentity, dir: &Path) -> std::io::Result<Self> {
        let mut client = Self::new(identity);
        let mut pending = vec![dir.to_path_buf()];
        while let Some(d) = pending.pop() {
            for entry in std::fs::read_dir(&d)? {
                let path = entry?.path();
                let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
                if path.is_dir() {
                    pending.push(path);
                } else if name.ends_with(".json") && !name.ends_with(".parsed.json") {
                    let record: RawRecord = serde_json::from_str(&std::fs::read_to_string(&path)?)
                        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))?;
                    client.replies.insert(record.prompt_sha256, record.reply);
                }
            }
        }
        Ok(client)
    }

    pub fn len(&self) -> usize {
        self.replies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replies.is_empty()
    }
}

impl ChatClient for MockChatClient {
    fn identity(&self) -> ModelIdentity {
        self.identity.clone()
    }

    fn send(&self, prompt: &str, _temperature: f64) -> Result<String, ChatError> {
        let key = sha256_hex(prompt);
        self.replies.get(&key).cloned().ok_or(ChatError::NoFixture { prompt_sha256: key })
    }
}

/// Returns queued replies in order, regardless of the prompt. Used to record
/// fixtures.
pub struct ScriptedChatClient {
    identity: ModelIdentity,
    replies: RefCell<VecDeque<String>>,
}

impl ScriptedChatClient {
    pub fn new(identity: ModelIdentity, replies: impl IntoIterator<Item = String>) -> Self {
        ScriptedChatClient { identity, replies: RefCell::new(replies.into_iter().collect()) }
    }

    pub fn remaining(&self) -> usize {
        self.replies.borrow().len()
    }
}

impl ChatClient for ScriptedChatClient {
    fn identity(&self) -> ModelIdentity {
        self.identity.clone()
    }

    fn send(&self, _prompt: &str, _temperature: f64) -> Result<String, ChatError> {
        self.replies.borrow_mut().pop_front().ok_or_else(|| ChatError::Transport("script exhausted".into()))
    }
}

/// Refuses every request.
pub struct OfflineClient(pub ModelIdentity);

impl ChatClient for OfflineClient {
    fn identity(&self) -> ModelIdentity {
        self.0.clone()
    }

    fn send(&self, _prompt: &str, _temperature: f64) -> Result<String, ChatError> {
        Err(ChatError::Offline)
    }
}

/// Answers every prompt by handing the transcript segment back unchanged in
/// the stage's output format. Diarization replies alternate Doctor and
/// Patient; correction replies keep the `Speaker:` prefix of each line.
pub struct EchoChatClient {
    template: PromptTemplate,
}

impl EchoChatClient {
    pub fn new(template: PromptTemplate) -> Self {
        EchoChatClient { template }
    }

    fn segment<'a>(&self, prompt: &'a str) -> Option<&'a str> {
        let middle = self.template.middle()?;
        let suffix = self.template.suffix()?;
        let body = prompt.strip_suffix(suffix)?;
        let start = body.rfind(middle)? + middle.len();
        Some(&body[start..])
    }
}

impl ChatClient for EchoChatClient {
    fn identity(&self) -> ModelIdentity {
        ModelIdentity::new("echo", self.template.stage.label())
    }

    fn send(&self, prompt: &str, _temperature: f64) -> Result<String, ChatError> {
        let segment = self
            .segment(prompt)
            .ok_or_else(|| ChatError::BadResponse("prompt does not match the echo template".into()))?;
        let items: Vec<Value> = segment
            .lines()
            .enumerate()
            .map(|(i, line)| match self.template.stage {
                StageKind::Punctuation => json!({ "sentence": line }),
                StageKind::Diarization => json!({
                    "sentence": line,
                    "justification": "echo",
                    "speaker": if i % 2 == 0 { "Doctor" } else { "Patient" },
                }),
                StageKind::Correction => {
                    let (speaker, text) = match line.split_once(": ") {
                        Some((s @ ("Doctor" | "Patient"), t)) => (s, t),
                        _ => ("Doctor", line),
                    };
                    json!({
                        "reference_sentence": text,
                        "rationale": "echo",
                        "corrected_sentence": text,
                        "speaker": speaker,
                    })
                }
            })
            .collect();
        Ok(Value::Array(items).to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    /// `POST {endpoint}` with an OpenAI-style `chat/completions` body.
    OpenaiCompatible,
    /// Anthropic Messages API.
    Anthropic,
    /// Google `generateContent`; `{model}` in the endpoint is substituted.
    Gemini,
}

pub struct HttpChatClient {
    pub kind: ProviderKind,
    pub endpoint: String,
    pub model: String,
    pub api_key: Secret,
    pub timeout: Duration,
}

impl HttpChatClient {
    pub fn new(kind: ProviderKind, endpoint: impl Into<String>, model: impl Into<String>, api_key: Secret) -> Self {
        HttpChatClient {
            kind,
            endpoint: endpoint.into(),
            model: model.into(),
            api_key,
            timeout: Duration::from_secs(300),
        }
    }

    fn request(&self, prompt: &str, temperature: f64) -> (String, Vec<(&'static str, String)>, Value) {
        let key = self.api_key.expose().to_string();
        match self.kind {
            ProviderKind::OpenaiCompatible => (
                self.endpoint.clone(),
                vec![("Authorization", format!("Bearer {key}"))],
                json!({
                    "model": self.model,
                    "temperature": temperature,
                    "messages": [{ "role": "user", "content": prompt }],
                }),
            ),
            ProviderKind::Anthropic => (
                self.endpoint.clone(),
                vec![("x-api-key", key), ("anthropic-version", "2023-06-01".to_string())],
                json!({
                    "model": self.model,
                    "max_tokens": 8192,
                    "temperature": temperature,
                    "messages": [{ "role": "user", "content": prompt }],
                }),
            ),
            ProviderKind::Gemini => (
                self.endpoint.replace("{model}", &self.model),
                vec![("x-goog-api-key", key)],
                json!({
                    "contents": [{ "role": "user", "parts": [{ "text": prompt }] }],
                    "generationConfig": { "temperature": temperature },
                }),
            ),
        }
    }

    fn extract(&self, body: &Value) -> Option<String> {
        let texts = |parts: &Vec<Value>, field: &str| -> String {
            parts.iter().filter_map(|p| p.get(field).and_then(Value::as_str)).collect::<Vec<_>>().concat()
        };
        match self.kind {
            ProviderKind::OpenaiCompatible => {
                body.pointer("/choices/0/message/content").and_then(Value::as_str).map(str::to_string)
            }
            ProviderKind::Anthropic => body.get("content").and_then(Value::as_array).map(|c| texts(c, "text")),
            ProviderKind::Gemini => body
                .pointer("/candidates/0/content/parts")
                .and_then(Value::as_array)
                .map(|p| texts(p, "text")),
        }
    }
}

impl ChatClient for HttpChatClient {
    fn identity(&self) -> ModelIdentity {
        let provider = match self.kind {
            ProviderKind::OpenaiCompatible => "openai",
            ProviderKind::Anthropic => "anthropic",
            ProviderKind::Gemini => "gemini",
        };
        ModelIdentity::new(provider, self.model.clone())
    }

    fn send(&self, prompt: &str, temperature: f64) -> Result<String, ChatError> {
        let (url, headers, body) = self.request(prompt, temperature);
        let headers: Vec<(&str, String)> = headers.into_iter().collect();
        let reply = post_json(&url, &headers, &body, self.timeout).map_err(ChatError::Transport)?;
        if !(200..300).contains(&reply.status) {
            return Err(ChatError::Http { status: reply.status, body: reply.body });
        }
        let json: Value = serde_json::from_str(&reply.body).map_err(|e| ChatError::BadResponse(e.to_string()))?;
        self.extract(&json).ok_or_else(|| ChatError::BadResponse("no text content".into()))
    }
}
