//! Waveforms and log-mel feature extraction.
//!
//! The model consumes 80-channel log-mel filterbank features computed at
//! a 10 ms hop over 25 ms Hann windows, standardized per utterance. Only
//! 16 kHz mono audio is supported; the synthetic corpus and the WAV
//! loader in the companion crate both produce exactly that.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// The only sample rate the feature frontend accepts.
pub const SAMPLE_RATE: u32 = 16_000;

/// Analysis hop: 160 samples = 10 ms.
pub const HOP_SAMPLES: usize = 160;

/// Analysis window: 400 samples = 25 ms.
pub const WINDOW_SAMPLES: usize = 400;

/// Mel filterbank channels per frame.
pub const NUM_MELS: usize = 80;

/// Seconds covered by one feature frame hop.
pub const FRAME_SECONDS: f64 = HOP_SAMPLES as f64 / SAMPLE_RATE as f64;

const NUM_BINS: usize = WINDOW_SAMPLES / 2 + 1;
const POWER_FLOOR: f64 = 1e-10;
const STD_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum AudioError {
    /// The feature frontend only handles [`SAMPLE_RATE`] input.
    UnsupportedRate { rate: u32 },
    /// Slice starting at or beyond the end of the waveform.
    SliceOutOfRange { start: f64, duration: f64 },
}

impl core::fmt::Display for AudioError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            AudioError::UnsupportedRate { rate } => {
                write!(f, "unsupported sample rate {rate} Hz (need {SAMPLE_RATE} Hz)")
            }
            AudioError::SliceOutOfRange { start, duration } => {
                write!(f, "slice start {start} s is outside audio of {duration} s")
            }
        }
    }
}

impl core::error::Error for AudioError {}

/// A mono waveform with samples in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Audio {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Audio {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Self { samples, sample_rate }
    }

    /// All-zero waveform of the given length in seconds.
    pub fn silence(duration: f64, sample_rate: u32) -> Self {
        let n = math::round(duration * f64::from(sample_rate)) as usize;
        Self { samples: vec![0.0; n], sample_rate }
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    /// Copy out `[start, start + duration)` seconds, clipping the end to
    /// the available audio. Boundaries round to whole samples. A start
    /// before 0 or at/after the end of the waveform is an error; a short
    /// final slice is not.
    pub fn slice(&self, start: f64, duration: f64) -> Result<Audio, AudioError> {
        let total = self.duration();
        if !(0.0..total).contains(&start) || duration < 0.0 {
            return Err(AudioError::SliceOutOfRange { start, duration: total });
        }
        let rate = f64::from(self.sample_rate);
        let begin = math::round(start * rate) as usize;
        let end = (math::round((start + duration) * rate) as usize).min(self.samples.len());
        let begin = begin.min(end);
        Ok(Audio {
            samples: self.samples[begin..end].to_vec(),
            sample_rate: self.sample_rate,
        })
    }
}

/// Feature matrix, row-major `[frames × NUM_MELS]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    data: Vec<f64>,
    frames: usize,
}

impl Features {
    /// Wraps a pre-computed row-major `[frames × NUM_MELS]` buffer.
    /// Returns `None` when the buffer length does not match.
    pub fn from_raw(data: Vec<f64>, frames: usize) -> Option<Features> {
        if data.len() == frames * NUM_MELS {
            Some(Features { data, frames })
        } else {
            None
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dim(&self) -> usize {
        NUM_MELS
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * NUM_MELS..(t + 1) * NUM_MELS]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Number of feature frames a waveform of `samples` samples yields.
pub fn num_frames(samples: usize) -> usize {
    if samples < WINDOW_SAMPLES {
        0
    } else {
        (samples - WINDOW_SAMPLES) / HOP_SAMPLES + 1
    }
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * math::log10(1.0 + hz / 700.0)
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (math::pow(10.0, mel / 2595.0) - 1.0)
}

/// One triangular mel filter as a dense weight run over DFT bins.
#[derive(Debug, Clone)]
struct MelFilter {
    first_bin: usize,
    weights: Vec<f64>,
}

/// Reusable log-mel extractor. Precomputes the Hann window, the DFT
/// basis and the mel filterbank once; extraction is then allocation-only.
#[derive(Debug, Clone)]
pub struct MelExtractor {
    window: Vec<f64>,
    /// cos/sin of 2π·k·n/N for k in 0..NUM_BINS, n in 0..WINDOW_SAMPLES.
    cos_table: Vec<f64>,
    sin_table: Vec<f64>,
    filters: Vec<MelFilter>,
}

impl Default for MelExtractor {
    fn default() -> Self {
        Self::new()
    }
}

impl MelExtractor {
    pub fn new() -> Self {
        let n = WINDOW_SAMPLES as f64;
        let mut window = Vec::with_capacity(WINDOW_SAMPLES);
        for i in 0..WINDOW_SAMPLES {
            window.push(0.5 - 0.5 * math::cos(2.0 * core::f64::consts::PI * i as f64 / n));
        }

        let mut cos_table = Vec::with_capacity(NUM_BINS * WINDOW_SAMPLES);
        let mut sin_table = Vec::with_capacity(NUM_BINS * WINDOW_SAMPLES);
        for k in 0..NUM_BINS {
            for i in 0..WINDOW_SAMPLES {
                let angle = 2.0 * core::f64::consts::PI * (k * i) as f64 / n;
                cos_table.push(math::cos(angle));
                sin_table.push(math::sin(angle));
            }
        }

        Self {
            window,
            cos_table,
            sin_table,
            filters: build_filterbank(),
        }
    }

    /// Power spectrum (squared DFT magnitude) of one already-windowed
    /// frame, bins 0..=200.
    fn power_spectrum(&self, frame: &[f64], out: &mut [f64]) {
        for (k, slot) in out.iter_mut().enumerate() {
            let cos_row = &self.cos_table[k * WINDOW_SAMPLES..(k + 1) * WINDOW_SAMPLES];
            let sin_row = &self.sin_table[k * WINDOW_SAMPLES..(k + 1) * WINDOW_SAMPLES];
            let mut re = 0.0;
            let mut im = 0.0;
            for i in 0..WINDOW_SAMPLES {
                re += frame[i] * cos_row[i];
                im -= frame[i] * sin_row[i];
            }
            *slot = re * re + im * im;
        }
    }

    /// Standardized log-mel features for a whole waveform. Audio shorter
    /// than one analysis window yields zero frames.
    pub fn extract(&self, audio: &Audio) -> Result<Features, AudioError> {
        if audio.sample_rate != SAMPLE_RATE {
            return Err(AudioError::UnsupportedRate { rate: audio.sample_rate });
        }
        let frames = num_frames(audio.samples.len());
        let mut data = Vec::with_capacity(frames * NUM_MELS);
        let mut windowed = vec![0.0; WINDOW_SAMPLES];
        let mut power = vec![0.0; NUM_BINS];
        for t in 0..frames {
            let offset = t * HOP_SAMPLES;
            for (slot, (sample, weight)) in windowed
                .iter_mut()
                .zip(audio.samples[offset..].iter().zip(&self.window))
            {
                *slot = sample * weight;
            }
            self.power_spectrum(&windowed, &mut power);
            for filter in &self.filters {
                let mut energy = 0.0;
                for (j, w) in filter.weights.iter().enumerate() {
                    energy += w * power[filter.first_bin + j];
                }
                data.push(math::log10(energy.max(POWER_FLOOR)));
            }
        }

        standardize(&mut data);
        Ok(Features { data, frames })
    }
}

/// Zero-mean, unit-variance over the whole utterance. Flat input (all
/// values equal, e.g. pure silence) maps to all zeros.
fn standardize(data: &mut [f64]) {
    if data.is_empty() {
        return;
    }
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let var = data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = math::sqrt(var);
    if std < STD_FLOOR {
        data.fill(0.0);
        return;
    }
    for v in data.iter_mut() {
        *v = (*v - mean) / std;
    }
}

/// 80 triangular filters with centers equally spaced on the mel scale
/// between 0 Hz and 8 kHz.
fn build_filterbank() -> Vec<MelFilter> {
    let mel_low = hz_to_mel(0.0);
    let mel_high = hz_to_mel(f64::from(SAMPLE_RATE) / 2.0);
    let bin_hz = f64::from(SAMPLE_RATE) / WINDOW_SAMPLES as f64;

    // NUM_MELS + 2 edge points; filter m spans edges m..m+2.
    let edges: Vec<f64> = (0..NUM_MELS + 2)
        .map(|i| mel_to_hz(mel_low + (mel_high - mel_low) * i as f64 / (NUM_MELS + 1) as f64))
        .collect();

    let mut filters = Vec::with_capacity(NUM_MELS);
    for m in 0..NUM_MELS {
        let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let mut first_bin = None;
        let mut weights = Vec::new();
        for k in 0..NUM_BINS {
            let hz = k as f64 * bin_hz;
            let w = if hz <= lo || hz >= hi {
                0.0
            } else if hz <= center {
                (hz - lo) / (center - lo)
            } else {
                (hi - hz) / (hi - center)
            };
            if w > 0.0 {
                if first_bin.is_none() {
                    first_bin = Some(k);
                }
                weights.push(w);
            } else if first_bin.is_some() {
                break;
            }
        }
        // Very narrow low-frequency filters can miss every bin center;
        // fall back to the single nearest bin so no channel is dead.
        let (first_bin, weights) = match first_bin {
            Some(b) => (b, weights),
            None => ((center / bin_hz + 0.5) as usize, vec![1.0]),
        };
        filters.push(MelFilter { first_bin, weights });
    }
    filters
}

/// One-shot convenience over [`MelExtractor`]; prefer the struct when
/// extracting from many utterances.
pub fn log_mel(audio: &Audio) -> Result<Features, AudioError> {
    MelExtractor::new().extract(audio)
}
