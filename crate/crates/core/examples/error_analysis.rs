//! Error analysis of a correction stage: per-category changes in concept
//! errors and how often small spelling slips were fixed.
//!
//! ```text
//! cargo run --example error_analysis
//! ```

use medscore::analysis::{
    char_diff_report, deltas_from_counts, merge_category_counts, substitution_records, LOW_DIFF_THRESHOLD,
};
use medscore::concepts::{Annotator, DictionaryAnnotator};
use medscore::metrics::{compute_mc_wer, McWerVariant};
use medscore::report::table::format_delta;
use medscore::transcript::{normalize_text, NormalizationConfig, TokenSequence};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = NormalizationConfig::default();
    let annotator = DictionaryAnnotator::bundled();
    let tokens = |s: &str| TokenSequence::from_text(&normalize_text(s, &cfg));
    // (reference, raw ASR, after correction)
    let conversations = [
        ("She takes fexofenadine for hay fever.", "she takes fexifenadine for hay fever", "she takes fexofenadine for hay fever"),
        ("We switched her to amoxicillin.", "we switched her to ampicillin", "we switched her to ampicillin"),
        ("History of hypertension.", "history of high tension", "history of hypertension and aspirin"),
    ];

    let mut before = Vec::new();
    let mut after = Vec::new();
    let mut records = Vec::new();
    for (reference, asr, corrected) in conversations {
        let r = tokens(reference);
        let ra = annotator.annotate(&r)?;
        let score = |h: &TokenSequence| -> Result<_, Box<dyn std::error::Error>> {
            Ok(compute_mc_wer(&r, h, &ra, &annotator.annotate(h)?, McWerVariant::Lemmatized)?)
        };
        let (b, a) = (score(&tokens(asr))?, score(&tokens(corrected))?);
        records.extend(substitution_records(&b, &a)?);
        before.push(b);
        after.push(a);
    }

    println!("category deltas (after - before):");
    for d in deltas_from_counts(&merge_category_counts(&before), &merge_category_counts(&after)) {
        println!("  {:16} {:13} {:>3} -> {:<3} {}", d.category.label(), d.kind.label(), d.before, d.after, format_delta(d.delta));
    }
    println!("substitutions before correction:");
    for r in &records {
        println!("  {} -> {} distance {} fixed: {}", r.ref_surface, r.hyp_surface, r.char_distance, r.resolved_by_correction);
    }
    let report = char_diff_report(&records, LOW_DIFF_THRESHOLD);
    println!(
        "{} of {} substitutions differ by fewer than {} characters; {} of those were fixed",
        report.low_diff, report.total, report.threshold, report.low_diff_resolved
    );
    Ok(())
}
