//! Corpus WER for an ASR system against reference transcripts.
//!
//! ```text
//! cargo run --example score_wer [-- <reference.jsonl> <hypothesis.jsonl>]
//! ```

use std::path::{Path, PathBuf};

use medscore::metrics::{compute_wer, summarize};
use medscore::report::table::format_mean_std;
use medscore::transcript::{load_corpus, tokenize, CorpusFormat, NormalizationConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/minicorpus");
    let mut args = std::env::args().skip(1).map(PathBuf::from);
    let reference = args.next().unwrap_or_else(|| fixtures.join("reference.jsonl"));
    let hypothesis = args.next().unwrap_or_else(|| fixtures.join("asr.jsonl"));

    let cfg = NormalizationConfig::default();
    let refs = load_corpus(&reference, CorpusFormat::TurnsJsonl)?;
    let hyps = load_corpus(&hypothesis, CorpusFormat::TurnsJsonl)?;
    let mut values = Vec::new();
    for r in &refs {
        let Some(h) = hyps.iter().find(|h| h.conversation_id == r.conversation_id) else {
            eprintln!("{}: no hypothesis", r.conversation_id);
            continue;
        };
        let w = compute_wer(&tokenize(r, &cfg)?, &tokenize(h, &cfg)?)?;
        let c = w.counts;
        println!(
            "{}  WER ({} + {} + {}) / {} = {:.4}",
            r.conversation_id,
            c.substitutions,
            c.deletions,
            c.insertions,
            c.reference_len,
            w.value()
        );
        values.push(w.value());
    }
    let s = summarize(&values)?;
    println!("mean WER {} over {} conversations", format_mean_std(s.mean, s.std_dev), s.n);
    Ok(())
}
