//! Cuts a 16-bit PCM WAV file into 20-second slices for ASR. Without an
//! argument a one-minute tone is generated first.
//!
//! ```text
//! cargo run --example slice_audio [-- <input.wav> <output dir>]
//! ```

use std::path::PathBuf;

use hound::{SampleFormat, WavSpec, WavWriter};
use medscore::pipeline::{slice_audio_pcm, DEFAULT_SLICE_SECONDS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scratch = tempfile::tempdir()?;
    let mut args = std::env::args().skip(1).map(PathBuf::from);
    let input = match args.next() {
        Some(path) => path,
        None => {
            let path = scratch.path().join("tone.wav");
            let spec = WavSpec { channels: 1, sample_rate: 16_000, bits_per_sample: 16, sample_format: SampleFormat::Int };
            let mut w = WavWriter::create(&path, spec)?;
            for i in 0..60 * 16_000u32 {
                let t = i as f32 / 16_000.0;
                w.write_sample(((t * 440.0 * std::f32::consts::TAU).sin() * 8_000.0) as i16)?;
            }
            w.finalize()?;
            path
        }
    };
    let out = args.next().unwrap_or_else(|| scratch.path().join("slices"));
    for slice in slice_audio_pcm(&input, &out, DEFAULT_SLICE_SECONDS)? {
        println!("{}  frames {}..{}", slice.path.display(), slice.start_frame, slice.start_frame + slice.frames);
    }
    Ok(())
}
