//! JSON-lines corpus manifests.
//!
//! A corpus on disk is a directory of WAV files plus one
//! `manifest.jsonl`: one UTF-8 JSON record per line, one line per
//! utterance, audio paths relative to the manifest's own directory so
//! the tree can be moved wholesale.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use subvox_core::synth::{CorpusSpec, SynthError, SynthExample};
use subvox_core::timestamp::TimedSegment;
use thiserror::Error;

use crate::wav;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path} line {line}: {source}")]
    Json { path: String, line: usize, source: serde_json::Error },
    #[error("{path}: {source}")]
    BadSpec { path: String, source: serde_json::Error },
    #[error("{path}: spec does not describe a usable corpus: {source}")]
    UnusableSpec { path: String, source: SynthError },
    #[error(transparent)]
    Wav(#[from] wav::WavError),
}

fn io_err(path: &Path, source: std::io::Error) -> ManifestError {
    ManifestError::Io { path: path.display().to_string(), source }
}

/// One word-level span as serialized in a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanRecord {
    pub start: f64,
    pub end: f64,
    pub text: String,
}

impl From<&TimedSegment> for SpanRecord {
    fn from(seg: &TimedSegment) -> Self {
        Self { start: seg.start, end: seg.end, text: seg.text.clone() }
    }
}

impl From<&SpanRecord> for TimedSegment {
    fn from(rec: &SpanRecord) -> Self {
        TimedSegment::new(rec.start, rec.end, rec.text.clone())
    }
}

/// One manifest line. Field names are the on-disk schema; stability
/// matters more than brevity here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub audio_path: String,
    pub transcript: String,
    pub smoothed: String,
    pub translation: String,
    pub pronunciation: String,
    pub explanation: Option<String>,
    pub word_spans: Vec<SpanRecord>,
    pub context: Vec<String>,
}

impl Record {
    pub fn from_example(ex: &SynthExample, audio_path: String) -> Self {
        Self {
            audio_path,
            transcript: ex.transcript.clone(),
            smoothed: ex.smoothed.clone(),
            translation: ex.translation.clone(),
            pronunciation: ex.pronunciation.clone(),
            explanation: ex.explanation.clone(),
            word_spans: ex.word_spans.iter().map(SpanRecord::from).collect(),
            context: ex.context.clone(),
        }
    }
}

/// Write `examples` to `dir` as `utt_NNNN.wav` files plus
/// `manifest.jsonl`, creating the directory if needed. Returns the
/// manifest path. Deterministic: equal corpora produce byte-identical
/// trees.
pub fn save_corpus(dir: &Path, examples: &[SynthExample]) -> Result<PathBuf, ManifestError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let manifest_path = dir.join("manifest.jsonl");
    let mut lines = String::new();
    for (i, ex) in examples.iter().enumerate() {
        let name = format!("utt_{i:04}.wav");
        wav::write_wav(&dir.join(&name), &ex.audio)?;
        let record = Record::from_example(ex, name);
        lines.push_str(&serde_json::to_string(&record).expect("record serializes"));
        lines.push('\n');
    }
    let mut file = fs::File::create(&manifest_path).map_err(|e| io_err(&manifest_path, e))?;
    file.write_all(lines.as_bytes()).map_err(|e| io_err(&manifest_path, e))?;
    Ok(manifest_path)
}

/// The generation parameters stored next to a manifest as `spec.json`.
/// Tone assignments are a pure function of the seed, so the scalar
/// fields reconstruct the full [`CorpusSpec`] (and with it the lexicon
/// and model vocabulary).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecRecord {
    pub seed: u64,
    pub n_utterances: usize,
    pub vocab_size: usize,
    pub words_per_utterance: (usize, usize),
    pub context_depth: usize,
    pub gap_seconds: f64,
    pub context_dependent_fraction: f64,
}

impl SpecRecord {
    pub fn from_spec(spec: &CorpusSpec) -> Self {
        Self {
            seed: spec.seed,
            n_utterances: spec.n_utterances,
            vocab_size: spec.vocab_size,
            words_per_utterance: spec.words_per_utterance,
            context_depth: spec.context_depth,
            gap_seconds: spec.gap_seconds,
            context_dependent_fraction: spec.context_dependent_fraction,
        }
    }

    pub fn to_spec(&self) -> Result<CorpusSpec, SynthError> {
        let mut spec = CorpusSpec::new(self.seed, self.n_utterances, self.vocab_size)?;
        spec.words_per_utterance = self.words_per_utterance;
        spec.context_depth = self.context_depth;
        spec.gap_seconds = self.gap_seconds;
        spec.context_dependent_fraction = self.context_dependent_fraction;
        Ok(spec)
    }
}

/// Write `spec.json` beside the manifest in `dir`.
pub fn save_spec(dir: &Path, spec: &CorpusSpec) -> Result<PathBuf, ManifestError> {
    let path = dir.join("spec.json");
    let mut json = serde_json::to_string_pretty(&SpecRecord::from_spec(spec))
        .expect("spec record serializes");
    json.push('\n');
    fs::write(&path, json).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

/// Load the `spec.json` sitting beside `manifest` and rebuild the
/// corpus spec from it.
pub fn load_spec(manifest: &Path) -> Result<CorpusSpec, ManifestError> {
    let path = manifest.parent().unwrap_or(Path::new(".")).join("spec.json");
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let record: SpecRecord = serde_json::from_str(&text)
        .map_err(|source| ManifestError::BadSpec { path: path.display().to_string(), source })?;
    record
        .to_spec()
        .map_err(|source| ManifestError::UnusableSpec { path: path.display().to_string(), source })
}

/// Read a manifest's records without touching the audio files.
pub fn read_records(manifest: &Path) -> Result<Vec<Record>, ManifestError> {
    let file = fs::File::open(manifest).map_err(|e| io_err(manifest, e))?;
    let mut records = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(manifest, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|source| ManifestError::Json {
            path: manifest.display().to_string(),
            line: n + 1,
            source,
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Load a full corpus: records plus their audio, paths resolved
/// relative to the manifest.
pub fn load_corpus(manifest: &Path) -> Result<Vec<SynthExample>, ManifestError> {
    let base = manifest.parent().unwrap_or(Path::new("."));
    read_records(manifest)?
        .into_iter()
        .map(|r| {
            let audio = wav::read_wav(&base.join(&r.audio_path))?;
            Ok(SynthExample {
                audio,
                transcript: r.transcript,
                smoothed: r.smoothed,
                translation: r.translation,
                pronunciation: r.pronunciation,
                explanation: r.explanation,
                word_spans: r.word_spans.iter().map(TimedSegment::from).collect(),
                context: r.context,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use subvox_core::synth::{gen_corpus, CorpusSpec};

    fn corpus() -> Vec<SynthExample> {
        gen_corpus(&CorpusSpec::new(5, 4, 8).unwrap()).unwrap()
    }

    #[test]
    fn corpus_round_trips_up_to_pcm_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let examples = corpus();
        let manifest = save_corpus(dir.path(), &examples).unwrap();
        let back = load_corpus(&manifest).unwrap();
        assert_eq!(back.len(), examples.len());
        for (b, e) in back.iter().zip(&examples) {
            assert_eq!(b.transcript, e.transcript);
            assert_eq!(b.smoothed, e.smoothed);
            assert_eq!(b.translation, e.translation);
            assert_eq!(b.pronunciation, e.pronunciation);
            assert_eq!(b.explanation, e.explanation);
            assert_eq!(b.word_spans, e.word_spans);
            assert_eq!(b.context, e.context);
            assert_eq!(b.audio.samples.len(), e.audio.samples.len());
            for (x, y) in b.audio.samples.iter().zip(&e.audio.samples) {
                assert!((x - y).abs() < 1.0 / 32000.0);
            }
        }
    }

    #[test]
    fn saving_twice_is_byte_identical() {
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let examples = corpus();
        let m1 = save_corpus(d1.path(), &examples).unwrap();
        let m2 = save_corpus(d2.path(), &examples).unwrap();
        assert_eq!(fs::read(&m1).unwrap(), fs::read(&m2).unwrap());
        for i in 0..examples.len() {
            let name = format!("utt_{i:04}.wav");
            assert_eq!(
                fs::read(d1.path().join(&name)).unwrap(),
                fs::read(d2.path().join(&name)).unwrap()
            );
        }
    }

    #[test]
    fn blank_lines_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = save_corpus(dir.path(), &corpus()).unwrap();
        let mut text = fs::read_to_string(&manifest).unwrap();
        text.push_str("\n\n");
        fs::write(&manifest, text).unwrap();
        assert_eq!(read_records(&manifest).unwrap().len(), 4);
    }

    #[test]
    fn bad_json_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.jsonl");
        fs::write(&path, "{\"audio_path\": \"x.wav\"\n").unwrap();
        match read_records(&path).unwrap_err() {
            ManifestError::Json { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn missing_audio_file_surfaces() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = save_corpus(dir.path(), &corpus()).unwrap();
        fs::remove_file(dir.path().join("utt_0002.wav")).unwrap();
        assert!(matches!(load_corpus(&manifest), Err(ManifestError::Wav(_))));
    }

    #[test]
    fn spec_round_trips_to_equal_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = CorpusSpec::new(5, 4, 8).unwrap();
        spec.words_per_utterance = (2, 4);
        spec.context_depth = 1;
        let examples = subvox_core::synth::gen_corpus(&spec).unwrap();
        let manifest = save_corpus(dir.path(), &examples).unwrap();
        save_spec(dir.path(), &spec).unwrap();
        let back = load_spec(&manifest).unwrap();
        assert_eq!(back, spec);
        assert_eq!(subvox_core::synth::gen_corpus(&back).unwrap(), examples);
    }

    #[test]
    fn unusable_spec_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("spec.json");
        let record = SpecRecord {
            seed: 1,
            n_utterances: 0,
            vocab_size: 8,
            words_per_utterance: (2, 4),
            context_depth: 1,
            gap_seconds: 0.04,
            context_dependent_fraction: 0.25,
        };
        fs::write(&path, serde_json::to_string(&record).unwrap()).unwrap();
        let err = load_spec(&dir.path().join("manifest.jsonl")).unwrap_err();
        assert!(matches!(err, ManifestError::UnusableSpec { .. }), "{err}");
    }
}
