//! On-disk store of raw and validated stage replies.
//!
//! Layout: `<root>/<stage>/<model>/<prompt-sha256>.json` holds the raw reply
//! and `<prompt-sha256>.parsed.json` the validated items.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::client::ModelIdentity;
use super::{ParsedRecord, StageKind};
use crate::util::atomic_write;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub stage: StageKind,
    pub model: ModelIdentity,
    pub prompt_sha256: String,
    pub temperature: f64,
    pub reply: String,
}

#[derive(Debug, Clone)]
pub struct ResponseCache {
    root: PathBuf,
}

impl ResponseCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ResponseCache { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn dir(&self, stage: StageKind, model: &ModelIdentity) -> PathBuf {
        self.root.join(stage.label()).join(model.slug())
    }

    pub fn raw_path(&self, stage: StageKind, model: &ModelIdentity, prompt_sha256: &str) -> PathBuf {
        self.dir(stage, model).join(format!("{prompt_sha256}.json"))
    }

    pub fn parsed_path(&self, stage: StageKind, model: &ModelIdentity, prompt_sha256: &str) -> PathBuf {
        self.dir(stage, model).join(format!("{prompt_sha256}.parsed.json"))
    }

    pub fn load_raw(&self, stage: StageKind, model: &ModelIdentity, prompt_sha256: &str) -> io::Result<Option<RawRecord>> {
        read_json(&self.raw_path(stage, model, prompt_sha256))
    }

    pub fn load_parsed(
        &self,
        stage: StageKind,
        model: &ModelIdentity,
        prompt_sha256: &str,
    ) -> io::Result<Option<ParsedRecord>> {
        read_json(&self.parsed_path(stage, model, prompt_sha256))
    }

    pub fn store_raw(&self, record: &RawRecord) -> io::Result<PathBuf> {
        let path = self.raw_path(record.stage, &record.model, &record.prompt_sha256);
        atomic_write(&path, &to_pretty(record)?)?;
        Ok(path)
    }

    pub fn store_parsed(
        &self,
        stage: StageKind,
        model: &ModelIdentity,
        prompt_sha256: &str,
        parsed: &ParsedRecord,
    ) -> io::Result<PathBuf> {
        let path = self.parsed_path(stage, model, prompt_sha256);
        atomic_write(&path, &to_pretty(parsed)?)?;
        Ok(path)
    }
}

fn to_pretty<T: Serialize>(value: &T) -> io::Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(io::Error::other)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> io::Result<Option<T>> {
    match fs::read(path) {
        Ok(bytes) => serde_json::from_slice(&bytes)
            .map(Some)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display()))),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e),
    }
}
