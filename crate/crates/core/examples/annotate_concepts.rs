//! Concept annotation with the dictionary annotator and with the external
//! annotator served from its response cache.
//!
//! ```text
//! cargo run --example annotate_concepts
//! ```

use medscore::concepts::{Annotator, DictionaryAnnotator, ExternalAnnotator, Secret};
use medscore::transcript::{normalize_text, NormalizationConfig, TokenSequence};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = "History of high blood pressure; takes lisinopril and has hay fever.";
    let seq = TokenSequence::from_text(&normalize_text(text, &NormalizationConfig::default()));

    let dictionary = DictionaryAnnotator::bundled();
    println!("dictionary ({} phrases):", dictionary.dictionary().len());
    for a in dictionary.annotate(&seq)? {
        println!("  {:?} {} [{}]", a.span, a.surface, a.category);
    }

    // A cached service response stands in for the network call.
    let cache = tempfile::tempdir()?;
    let mut external = ExternalAnnotator::new("https://healthcare.example/analyzeEntities", Secret::new("unused"), cache.path());
    external.offline = true;
    let joined = seq.tokens.join(" ");
    let offset = |needle: &str| joined.find(needle).expect("present");
    let response = serde_json::json!({ "entityMentions": [
        { "type": "PROBLEM", "text": { "content": "high blood pressure", "beginOffset": offset("high blood pressure") } },
        { "type": "MEDICINE", "text": { "content": "lisinopril", "beginOffset": offset("lisinopril") } },
    ]});
    std::fs::write(external.cache_path(&joined), response.to_string())?;
    println!("external (cached):");
    for a in external.annotate(&seq)? {
        println!("  {:?} {} [{}]", a.span, a.surface, a.category);
    }
    Ok(())
}
