//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            fs::copy(entry.path(), &target).unwrap();
        }
    }
}

/// Copies the mini-corpus (config, transcripts, recorded LLM replies) into a
/// fresh temporary directory and returns it with the config path.
pub fn minicorpus() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    for name in ["config.json", "reference.jsonl", "asr.jsonl"] {
        fs::copy(fixtures().join("minicorpus").join(name), dir.path().join(name)).unwrap();
    }
    copy_dir(&fixtures().join("minicorpus/llm-fixtures"), &dir.path().join("llm-fixtures"));
    let config = dir.path().join("config.json");
    (dir, config)
}

/// Runs the CLI in-process and returns its exit code.
pub fn cli(args: &[&str]) -> i32 {
    medscore::cli::run_with_args(std::iter::once("medscore").chain(args.iter().copied()))
}

/// Full-table edit distance under unit costs.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

/// Exhaustive edit distance by recursion over the first elements, memoized.
/// Slower than [`edit_distance`] but shares no structure with it.
pub fn edit_distance_recursive<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    fn go<T: PartialEq>(a: &[T], b: &[T], i: usize, j: usize, memo: &mut Vec<Vec<Option<usize>>>) -> usize {
        if let Some(v) = memo[i][j] {
            return v;
        }
        let v = if i == a.len() {
            b.len() - j
        } else if j == b.len() {
            a.len() - i
        } else if a[i] == b[j] {
            go(a, b, i + 1, j + 1, memo)
        } else {
            1 + go(a, b, i + 1, j + 1, memo).min(go(a, b, i + 1, j, memo)).min(go(a, b, i, j + 1, memo))
        };
        memo[i][j] = Some(v);
        v
    }
    let mut memo = vec![vec![None; b.len() + 1]; a.len() + 1];
    go(a, b, 0, 0, &mut memo)
}

#[derive(Debug, Deserialize)]
pub struct GoldenScores {
    pub rows: Vec<GoldenRow>,
    pub analysis: GoldenAnalysis,
}

#[derive(Debug, Deserialize)]
pub struct GoldenRow {
    pub conversation_id: String,
    pub method: String,
    pub llm: Option<String>,
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub reference_words: usize,
    pub wer: [u64; 2],
    pub concepts: usize,
    pub lemmatized: GoldenConcepts,
    pub non_lemmatized: GoldenConcepts,
    #[serde(default)]
    pub speaker_wer: std::collections::BTreeMap<String, [u64; 2]>,
}

#[derive(Debug, Deserialize)]
pub struct GoldenConcepts {
    pub concept_substitutions: usize,
    pub concept_deletions: usize,
    pub concept_insertions: usize,
    pub mc_wer: [u64; 2],
}

#[derive(Debug, Deserialize)]
pub struct GoldenAnalysis {
    pub system: String,
    pub llm: String,
    pub conversations: usize,
    pub category_deltas: Vec<GoldenDelta>,
    pub char_diff: GoldenCharDiff,
}

#[derive(Debug, Deserialize)]
pub struct GoldenDelta {
    pub category: String,
    pub kind: String,
    pub before: usize,
    pub after: usize,
    pub delta: i64,
}

#[derive(Debug, Deserialize)]
pub struct GoldenCharDiff {
    pub threshold: usize,
    pub total: usize,
    pub low_diff: usize,
    pub low_diff_resolved: usize,
    pub substitutions: Vec<GoldenSubstitution>,
}

#[derive(Debug, Deserialize)]
pub struct GoldenSubstitution {
    pub ref_surface: String,
    pub hyp_surface: String,
    pub char_distance: usize,
    pub resolved_by_correction: bool,
}

pub fn golden_scores() -> GoldenScores {
    let text = fs::read_to_string(fixtures().join("minicorpus/golden/scores.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub fn fraction(f: [u64; 2]) -> f64 {
    f[0] as f64 / f[1] as f64
}
