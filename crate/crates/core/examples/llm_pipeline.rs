//! The three-stage LLM pipeline over one conversation.
//!
//! By default this uses the echo client, which hands every segment back
//! unchanged, so it runs offline. Set `OPENAI_API_KEY` and pass a model name
//! to call an OpenAI-compatible endpoint instead.
//!
//! ```text
//! cargo run --example llm_pipeline [-- <model>]
//! ```

use medscore::concepts::Secret;
use medscore::pipeline::{
    run_pipeline, ChatClient, EchoChatClient, HttpChatClient, PipelineConfig, PromptTemplate, ProviderKind,
    ResponseCache, StageKind,
};
use medscore::transcript::{SpeakerRole, Transcript};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let asr = Transcript::new(
        "demo",
        "demo",
        [
            "so what brings you in today",
            "i have had a headache for three days and some nausea",
            "are you taking anything for it",
            "just paracetamol",
        ]
        .map(|t| (SpeakerRole::Unknown, t)),
    )?;
    let cfg = PipelineConfig::default();
    let cache = tempfile::tempdir()?;
    let cache = ResponseCache::new(cache.path());

    let output = match std::env::args().nth(1) {
        Some(model) => {
            let key = Secret::from_env("OPENAI_API_KEY")?;
            let client = HttpChatClient::new(
                ProviderKind::OpenaiCompatible,
                "https://api.openai.com/v1/chat/completions",
                model,
                key,
            );
            run_pipeline(&asr, &StageKind::ALL, &cfg, &client, &cache)?
        }
        None => {
            // The echo client understands one stage's template, so run the
            // stages one at a time, each on the previous stage's transcript.
            let mut transcript = asr.clone();
            let mut last = None;
            for stage in StageKind::ALL {
                let client = EchoChatClient::new(PromptTemplate::default_for(stage));
                println!("{stage}: {}", client.identity());
                let out = run_pipeline(&transcript, &[stage], &cfg, &client, &cache)?;
                transcript = out.transcript.clone();
                last = Some(out);
            }
            last.expect("three stages ran")
        }
    };
    for turn in &output.transcript.turns {
        println!("{:8} {}", turn.speaker.as_str(), turn.text);
    }
    println!("cache: {}", cache.root().display());
    Ok(())
}
