//! Runs an external ASR command on an audio file and reads its stdout as an
//! undiarized transcript. The default command just prints a canned line.
//!
//! ```text
//! cargo run --example asr_command [-- <audio file> <program> [args...]]
//! ```
//!
//! `{audio}` in the arguments is replaced by the audio path.

use std::path::PathBuf;

use medscore::pipeline::AsrCommand;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let audio = args.next().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("visit.wav"));
    let program = args.next().unwrap_or_else(|| "echo".into());
    let mut rest: Vec<String> = args.collect();
    if rest.is_empty() {
        rest = vec!["transcribed from".into(), "{audio}".into()];
    }
    let command = AsrCommand { program, args: rest, system: "demo-asr".into() };
    let transcript = command.transcribe(&audio, "visit")?;
    for turn in &transcript.turns {
        println!("{:8} {}", turn.speaker.as_str(), turn.text);
    }
    Ok(())
}
