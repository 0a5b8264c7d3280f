//! Speaker-attributed WER: each role's words are scored as a separate stream.
//!
//! ```text
//! cargo run --example speaker_wer
//! ```

use medscore::metrics::compute_speaker_wer;
use medscore::transcript::{NormalizationConfig, SpeakerRole, Transcript};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    use SpeakerRole::{Doctor, Patient};
    let reference = Transcript::new(
        "visit",
        "demo",
        [
            (Doctor, "What brings you in today?"),
            (Patient, "I have had a cough for a week."),
            (Doctor, "Any fever?"),
            (Patient, "No fever."),
        ],
    )?;
    // The diarizer gave the doctor's question to the patient.
    let hypothesis = Transcript::new(
        "visit",
        "demo",
        [
            (Doctor, "What brings you in today?"),
            (Patient, "I have had a cough for a week. Any fever?"),
            (Patient, "No fever."),
        ],
    )?;
    let result = compute_speaker_wer(&reference, &hypothesis, &NormalizationConfig::default())?;
    for (role, w) in &result.per_role {
        let c = w.counts;
        println!("{role:8} WER {} (S={} D={} I={})", w.wer, c.substitutions, c.deletions, c.insertions);
    }
    if let Some(der) = result.diarization_error_rate() {
        println!("misattributed {} of {} words ({der})", result.misattributed_words, result.attributed_reference_words);
    }
    Ok(())
}
