//! Records mock-LLM fixtures for the mini-corpus.
//!
//! Replays the hand-written replies in `llm-script.json` (one list per
//! conversation, in call order) through the real pipeline, then keeps the raw
//! replies in the cache layout the mock client reads. Also writes the
//! pipeline outputs to `golden/pipeline/` for review.
//!
//! ```text
//! cargo run --example record_fixtures [-- <minicorpus dir>]
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use medscore::pipeline::{run_pipeline, ResponseCache, ScriptedChatClient, StageKind};
use medscore::report::RunConfig;
use medscore::transcript::{load_corpus, render_corpus, CorpusFormat, Transcript};
use serde::Deserialize;

#[derive(Deserialize)]
struct Script {
    conversation_id: String,
    replies: Vec<String>,
}

fn copy_raw_replies(from: &Path, to: &Path) -> std::io::Result<usize> {
    let mut copied = 0;
    for entry in fs::read_dir(from)? {
        let path = entry?.path();
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        if path.is_dir() {
            copied += copy_raw_replies(&path, &to.join(&name))?;
        } else if !name.ends_with(".parsed.json") {
            fs::create_dir_all(to)?;
            fs::copy(&path, to.join(&name))?;
            copied += 1;
        }
    }
    Ok(copied)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/minicorpus"));
    let config = RunConfig::load(&dir.join("config.json"))?;
    let settings = config.pipeline_settings()?;
    let pipeline_cfg = config.pipeline_config()?;
    let identity = settings.provider.identity();

    let scripts: Vec<Script> = serde_json::from_str(&fs::read_to_string(dir.join("llm-script.json"))?)?;
    let scripts: HashMap<String, Vec<String>> = scripts.into_iter().map(|s| (s.conversation_id, s.replies)).collect();

    let hyp = &config.hypotheses[0];
    let corpus = load_corpus(&config.resolve(&hyp.path), hyp.format)?;
    let scratch = tempfile::tempdir()?;
    let cache = ResponseCache::new(scratch.path());
    let mut per_stage: Vec<Vec<Transcript>> = vec![Vec::new(); settings.stages.len()];
    for t in &corpus {
        let replies = scripts.get(&t.conversation_id).ok_or(format!("no script for {}", t.conversation_id))?;
        let client = ScriptedChatClient::new(identity.clone(), replies.iter().cloned());
        let out = run_pipeline(t, &settings.stages, &pipeline_cfg, &client, &cache)?;
        if client.remaining() != 0 {
            return Err(format!("{}: {} scripted replies unused", t.conversation_id, client.remaining()).into());
        }
        for (i, stage) in out.stages.into_iter().enumerate() {
            per_stage[i].push(stage.transcript);
        }
    }

    let fixtures = config.resolve(settings.provider.fixtures.as_deref().expect("mock provider has fixtures"));
    if fixtures.exists() {
        fs::remove_dir_all(&fixtures)?;
    }
    let n = copy_raw_replies(scratch.path(), &fixtures)?;
    println!("{n} raw replies -> {}", fixtures.display());

    let golden = dir.join("golden/pipeline");
    fs::create_dir_all(&golden)?;
    for (stage, transcripts) in settings.stages.iter().zip(&per_stage) {
        let path = golden.join(format!("{stage}.jsonl"));
        fs::write(&path, render_corpus(transcripts, CorpusFormat::TurnsJsonl))?;
        println!("{} -> {}", StageKind::label(*stage), path.display());
    }
    Ok(())
}
