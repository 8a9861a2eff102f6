//! Core engine for long-form speech translation at desk scale.
//!
//! Everything in this crate is pure computation over in-memory data: mel
//! feature extraction, a deterministic synthetic bilingual corpus, the
//! timestamp token codec, instruction prompt construction, a small
//! audio-conditioned transformer with exact gradients, the sliding-window
//! long-audio decode loop, structured output parsing and the evaluation
//! metrics (WER/CER, BLEU, frame-level VAD precision/recall/F1).
//!
//! The crate is `no_std` (alloc required). File formats, WAV handling and
//! the command-line frontend live in the companion `subvox` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod audio;
pub mod longform;
pub mod metrics;
pub mod model;
pub mod parse;
pub mod prompt;
pub mod synth;
pub mod timestamp;
pub mod vocab;

mod math;
mod nn;
