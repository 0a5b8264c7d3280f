//! Hook for running an external speech recognizer.
//!
//! The command is run once per audio file with `{audio}` in its arguments
//! replaced by the file path. Whatever it prints on stdout is taken as the
//! undiarized transcript, one line per turn.

use std::path::Path;
use std::process::Command;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::transcript::{SpeakerRole, Transcript, TranscriptError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsrCommand {
    pub program: String,
    #[serde(default)]
    pub args: Vec<String>,
    /// Label recorded as the transcript's dataset tag, e.g. `whisper-large`.
    pub system: String,
}

#[derive(Debug, Error)]
pub enum AsrError {
    #[error("failed to start {program}: {source}")]
    Spawn { program: String, source: std::io::Error },
    #[error("{program} exited with {status}: {stderr}")]
    Failed { program: String, status: String, stderr: String },
    #[error("{program} printed non-UTF-8 output")]
    Encoding { program: String },
    #[error(transparent)]
    Transcript(#[from] TranscriptError),
}

impl AsrCommand {
    pub fn transcribe(&self, audio: &Path, conversation_id: &str) -> Result<Transcript, AsrError> {
        let audio_arg = audio.to_string_lossy();
        let args: Vec<String> = self.args.iter().map(|a| a.replace("{audio}", &audio_arg)).collect();
        let output = Command::new(&self.program)
            .args(&args)
            .output()
            .map_err(|source| AsrError::Spawn { program: self.program.clone(), source })?;
        if !output.status.success() {
            return Err(AsrError::Failed {
                program: self.program.clone(),
                status: output.status.to_string(),
                stderr: String::from_utf8_lossy(&output.stderr).trim().to_string(),
            });
        }
        let text = String::from_utf8(output.stdout).map_err(|_| AsrError::Encoding { program: self.program.clone() })?;
        let turns = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| (SpeakerRole::Unknown, l.trim().to_string()));
        Ok(Transcript::new(conversation_id, self.system.clone(), turns)?)
    }
}
