//! Fixed-length slicing of PCM WAV files.

use std::path::{Path, PathBuf};

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use thiserror::Error;

pub const DEFAULT_SLICE_SECONDS: u32 = 20;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("unsupported WAV format: {0}")]
    UnsupportedFormat(String),
    #[error("slice length must be at least one second")]
    ZeroSlice,
    #[error(transparent)]
    Wav(#[from] hound::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AudioSlice {
    pub path: PathBuf,
    pub start_frame: u64,
    pub frames: u64,
}

/// Reads the header of a 16-bit PCM WAV file, rejecting anything else.
pub fn check_pcm16(path: &Path) -> Result<WavSpec, AudioError> {
    match WavReader::open(path) {
        Ok(reader) => {
            let spec = reader.spec();
            if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
                return Err(AudioError::UnsupportedFormat(format!(
                    "{:?} {}-bit samples",
                    spec.sample_format, spec.bits_per_sample
                )));
            }
            if !(1..=2).contains(&spec.channels) {
                return Err(AudioError::UnsupportedFormat(format!("{} channels", spec.channels)));
            }
            Ok(spec)
        }
        // hound refuses compressed encodings (μ-law, A-law, ADPCM) while reading the header.
        Err(hound::Error::Unsupported) => Err(AudioError::UnsupportedFormat("non-PCM encoding".into())),
        Err(e) => Err(e.into()),
    }
}

/// Splits `input` into consecutive slices of `slice_seconds` (the last one may
/// be shorter), written as `<stem>_000.wav`, `<stem>_001.wav`, ... in `out_dir`.
pub fn slice_audio_pcm(input: &Path, out_dir: &Path, slice_seconds: u32) -> Result<Vec<AudioSlice>, AudioError> {
    if slice_seconds == 0 {
        return Err(AudioError::ZeroSlice);
    }
    let spec = check_pcm16(input)?;
    let mut reader = WavReader::open(input)?;
    let frames_per_slice = u64::from(slice_seconds) * u64::from(spec.sample_rate);
    let samples_per_slice = frames_per_slice * u64::from(spec.channels);
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("audio");
    std::fs::create_dir_all(out_dir).map_err(hound::Error::from)?;

    let mut slices = Vec::new();
    let mut samples = reader.samples::<i16>().peekable();
    let mut start_frame = 0u64;
    while samples.peek().is_some() {
        let path = out_dir.join(format!("{stem}_{:03}.wav", slices.len()));
        let mut writer = WavWriter::create(&path, spec)?;
        let mut written = 0u64;
        while written < samples_per_slice {
            match samples.next() {
                Some(sample) => writer.write_sample(sample?)?,
                None => break,
            }
            written += 1;
        }
        writer.finalize()?;
        let frames = written / u64::from(spec.channels);
        slices.push(AudioSlice { path, start_frame, frames });
        start_frame += frames;
    }
    Ok(slices)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tone(path: &Path, seconds: u32, rate: u32, channels: u16) -> Vec<i16> {
        let spec = WavSpec { channels, sample_rate: rate, bits_per_sample: 16, sample_format: SampleFormat::Int };
        let mut w = WavWriter::create(path, spec).unwrap();
        let n = seconds * rate * u32::from(channels);
        let samples: Vec<i16> = (0..n).map(|i| (i.wrapping_mul(7919) % 65536) as u16 as i16).collect();
        for &s in &samples {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
        samples
    }

    #[test]
    fn sixty_seconds_gives_three_slices() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("talk.wav");
        let original = write_tone(&input, 60, 16_000, 1);
        let slices = slice_audio_pcm(&input, &dir.path().join("out"), 20).unwrap();
        assert_eq!(slices.iter().map(|s| s.frames).collect::<Vec<_>>(), vec![320_000; 3]);
        let mut joined = Vec::new();
        for s in &slices {
            let mut r = WavReader::open(&s.path).unwrap();
            assert_eq!(r.duration(), 320_000);
            joined.extend(r.samples::<i16>().map(Result::unwrap));
        }
        assert_eq!(joined, original);
    }

    #[test]
    fn short_input_is_one_slice() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("short.wav");
        let original = write_tone(&input, 15, 8_000, 2);
        let slices = slice_audio_pcm(&input, dir.path(), 20).unwrap();
        assert_eq!(slices.len(), 1);
        assert_eq!(slices[0].frames, 15 * 8_000);
        let got: Vec<i16> = WavReader::open(&slices[0].path).unwrap().samples().map(Result::unwrap).collect();
        assert_eq!(got, original);
    }

    #[test]
    fn mu_law_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ulaw.wav");
        // Minimal WAVE_FORMAT_MULAW (7) file, 8-bit mono, 4 samples.
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"RIFF");
        bytes.extend_from_slice(&(4 + 8 + 18 + 8 + 4u32).to_le_bytes());
        bytes.extend_from_slice(b"WAVEfmt ");
        bytes.extend_from_slice(&18u32.to_le_bytes());
        bytes.extend_from_slice(&7u16.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&8000u32.to_le_bytes());
        bytes.extend_from_slice(&8000u32.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&8u16.to_le_bytes());
        bytes.extend_from_slice(&0u16.to_le_bytes());
        bytes.extend_from_slice(b"data");
        bytes.extend_from_slice(&4u32.to_le_bytes());
        bytes.extend_from_slice(&[0xff, 0x7f, 0x00, 0x80]);
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(slice_audio_pcm(&path, dir.path(), 20), Err(AudioError::UnsupportedFormat(_))));
    }

    #[test]
    fn float_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("float.wav");
        let spec = WavSpec { channels: 1, sample_rate: 8000, bits_per_sample: 32, sample_format: SampleFormat::Float };
        let mut w = WavWriter::create(&path, spec).unwrap();
        w.write_sample(0.5f32).unwrap();
        w.finalize().unwrap();
        assert!(matches!(slice_audio_pcm(&path, dir.path(), 20), Err(AudioError::UnsupportedFormat(_))));
    }
}
