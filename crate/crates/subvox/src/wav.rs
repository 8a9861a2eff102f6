//! WAV input/output in the toolkit's one audio format: 16 kHz mono
//! 16-bit PCM.
//!
//! There is deliberately no resampling or channel mixing here — the
//! synthetic corpus is generated at the canonical rate, so anything
//! else arriving at the decoder is a mistake worth surfacing, not
//! papering over.

use std::path::Path;

use subvox_core::audio::{Audio, SAMPLE_RATE};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WavError {
    #[error("{path}: {source}")]
    Io { path: String, source: hound::Error },
    #[error("{path}: {rate} Hz {channels}-channel {bits}-bit, need {SAMPLE_RATE} Hz mono 16-bit")]
    UnsupportedFormat { path: String, rate: u32, channels: u16, bits: u16 },
}

fn io_err(path: &Path, source: hound::Error) -> WavError {
    WavError::Io { path: path.display().to_string(), source }
}

/// Write audio as 16 kHz mono PCM16. Samples are clamped to [-1, 1]
/// and rounded to the nearest 16-bit level.
pub fn write_wav(path: &Path, audio: &Audio) -> Result<(), WavError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| io_err(path, e))?;
    for &s in &audio.samples {
        let level = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer.write_sample(level).map_err(|e| io_err(path, e))?;
    }
    writer.finalize().map_err(|e| io_err(path, e))
}

/// Read a 16 kHz mono PCM16 file back into [-1, 1] samples.
pub fn read_wav(path: &Path) -> Result<Audio, WavError> {
    let mut reader = hound::WavReader::open(path).map_err(|e| io_err(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1
        || spec.sample_rate != SAMPLE_RATE
        || spec.bits_per_sample != 16
        || spec.sample_format != hound::SampleFormat::Int
    {
        return Err(WavError::UnsupportedFormat {
            path: path.display().to_string(),
            rate: spec.sample_rate,
            channels: spec.channels,
            bits: spec.bits_per_sample,
        });
    }
    let samples: Result<Vec<f64>, hound::Error> = reader
        .samples::<i16>()
        .map(|s| s.map(|v| f64::from(v) / 32767.0))
        .collect();
    Ok(Audio::new(samples.map_err(|e| io_err(path, e))?, SAMPLE_RATE))
}
