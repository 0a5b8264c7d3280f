//! Word alignment between a reference and a hypothesis.
//!
//! ```text
//! cargo run --example align_words
//! ```

use medscore::align::{align_words, count_ops, EditOp};
use medscore::transcript::{normalize_text, NormalizationConfig, TokenSequence};

fn main() {
    let cfg = NormalizationConfig::default();
    let reference = TokenSequence::from_text(&normalize_text("The patient has hypertension.", &cfg));
    let hypothesis = TokenSequence::from_text(&normalize_text("the patient has high tension", &cfg));
    let path = align_words(&reference, &hypothesis);
    for op in &path.ops {
        let line = match *op {
            EditOp::Match { ref_index, .. } => format!("  = {}", reference.tokens[ref_index]),
            EditOp::Substitute { ref_index, hyp_index } => {
                format!("  S {} -> {}", reference.tokens[ref_index], hypothesis.tokens[hyp_index])
            }
            EditOp::Delete { ref_index } => format!("  D {}", reference.tokens[ref_index]),
            EditOp::Insert { hyp_index } => format!("  I {}", hypothesis.tokens[hyp_index]),
        };
        println!("{line}");
    }
    let c = count_ops(&path);
    println!("S={} D={} I={} N={}", c.substitutions, c.deletions, c.insertions, c.reference_len);
}
