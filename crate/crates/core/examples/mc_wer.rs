//! Medical-concept WER with the bundled dictionary annotator, in both
//! lemmatized and non-lemmatized form.
//!
//! ```text
//! cargo run --example mc_wer
//! ```

use medscore::concepts::{Annotator, DictionaryAnnotator};
use medscore::metrics::{compute_mc_wer, ConceptOutcome, McWerVariant};
use medscore::transcript::{normalize_text, NormalizationConfig, TokenSequence};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = NormalizationConfig::default();
    let annotator = DictionaryAnnotator::bundled();
    let pairs = [
        ("The patient has hypertension.", "the patient has high tension"),
        ("I prescribed amoxicillin.", "i prescribed ampicillin"),
        ("Keep taking the antibiotics.", "keep taking the antibiotic"),
    ];
    for (reference, hypothesis) in pairs {
        let r = TokenSequence::from_text(&normalize_text(reference, &cfg));
        let h = TokenSequence::from_text(&normalize_text(hypothesis, &cfg));
        let (ra, ha) = (annotator.annotate(&r)?, annotator.annotate(&h)?);
        println!("{reference:?} vs {hypothesis:?}");
        for variant in [McWerVariant::NonLemmatized, McWerVariant::Lemmatized] {
            let result = compute_mc_wer(&r, &h, &ra, &ha, variant)?;
            let mc = result.mc_wer.map(|m| m.to_string()).unwrap_or_else(|| "n/a".into());
            println!("  {variant:?}: MC-WER {mc}");
            for c in &result.concepts {
                if let ConceptOutcome::Substituted { hyp_surface } = &c.outcome {
                    println!("    {} ({}) -> {hyp_surface}", c.surface, c.category);
                }
            }
        }
    }
    Ok(())
}
