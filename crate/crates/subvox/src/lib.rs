//! Std companion to [`subvox_core`]: everything that touches the
//! filesystem or a terminal.
//!
//! The core crate owns the model, the timestamp codec, the long-form
//! decode loop and the metrics; this crate wraps them in file formats
//! (WAV audio, JSONL manifests, binary checkpoints, SRT/WebVTT
//! subtitles, JSON reports) and the `subvox` command-line tool.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod manifest;
pub mod report;
pub mod subtitle;
pub mod wav;
