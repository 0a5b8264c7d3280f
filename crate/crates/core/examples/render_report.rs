//! Scores the bundled mini-corpus (raw ASR plus recorded LLM outputs) and
//! renders the tables and plots.
//!
//! ```text
//! cargo run --example render_report [-- <output dir>]
//! ```

use std::path::{Path, PathBuf};

use medscore::pipeline::{run_pipeline, MockChatClient, ResponseCache};
use medscore::report::{evaluate, render_report, RunConfig};
use medscore::transcript::{load_corpus, render_corpus, CorpusFormat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/minicorpus");
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("medscore-demo"));

    let mut config = RunConfig::load(&fixtures.join("config.json"))?;
    config.output_dir = out.clone();
    let settings = config.pipeline_settings()?.clone();
    let client = MockChatClient::from_dir(settings.provider.identity(), &fixtures.join("llm-fixtures"))?;
    let cache = ResponseCache::new(config.cache_dir());
    let pipeline_cfg = config.pipeline_config()?;

    // Run the recorded pipeline and write each stage where `evaluate` looks for it.
    let hyp = &config.hypotheses[0];
    let corpus = load_corpus(&config.resolve(&hyp.path), hyp.format)?;
    let mut per_stage = vec![Vec::new(); settings.stages.len()];
    for t in &corpus {
        let output = run_pipeline(t, &settings.stages, &pipeline_cfg, &client, &cache)?;
        for (i, stage) in output.stages.into_iter().enumerate() {
            per_stage[i].push(stage.transcript);
        }
    }
    let dir = config.pipeline_dir(&hyp.system, &settings.provider.identity());
    std::fs::create_dir_all(&dir)?;
    for (stage, transcripts) in settings.stages.iter().zip(&per_stage) {
        std::fs::write(dir.join(format!("{stage}.jsonl")), render_corpus(transcripts, CorpusFormat::TurnsJsonl))?;
    }

    let report = evaluate(&config, true)?;
    std::fs::write(out.join("report.json"), report.to_json())?;
    for path in render_report(&report, &out)? {
        println!("{}", path.display());
    }
    print!("{}", std::fs::read_to_string(out.join("tables/wer.csv"))?);
    Ok(())
}
