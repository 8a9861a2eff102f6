//! Evaluation reports as stable JSON.
//!
//! One report covers one metric over one corpus. The schema is flat on
//! purpose — every score is a number under a documented key, so
//! downstream tooling can diff reports without metric-specific code:
//!
//! - `wer` / `cer`: `rate`, `substitutions`, `insertions`, `deletions`,
//!   `ref_len` (counts pooled over the corpus; per-utterance entries
//!   carry the same keys for that utterance alone);
//! - `bleu`: `bleu` (per-utterance entries score the sentence against
//!   its own reference);
//! - `vad`: `precision`, `recall`, `f1` (corpus scores pool frames
//!   across utterances).
//!
//! Keys appear in sorted order and runs are deterministic, so equal
//! inputs produce byte-identical reports.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use subvox_core::metrics::{ErrorRateReport, PRFReport};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Scores for one utterance, keyed by its manifest audio path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceScores {
    pub id: String,
    pub scores: BTreeMap<String, f64>,
}

/// A full evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub metric: String,
    pub corpus: BTreeMap<String, f64>,
    pub utterances: Vec<UtteranceScores>,
}

impl Report {
    pub fn new(metric: &str) -> Self {
        Self { metric: metric.to_string(), corpus: BTreeMap::new(), utterances: Vec::new() }
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), ReportError> {
        std::fs::write(path, self.to_json())
            .map_err(|source| ReportError::Io { path: path.display().to_string(), source })
    }
}

/// Error-rate scores under the documented keys.
pub fn error_rate_scores(r: &ErrorRateReport) -> BTreeMap<String, f64> {
    BTreeMap::from([
        ("rate".to_string(), r.rate()),
        ("substitutions".to_string(), r.substitutions as f64),
        ("insertions".to_string(), r.insertions as f64),
        ("deletions".to_string(), r.deletions as f64),
        ("ref_len".to_string(), r.ref_len as f64),
    ])
}

/// Precision/recall/F1 scores under the documented keys.
pub fn prf_scores(r: &PRFReport) -> BTreeMap<String, f64> {
    BTreeMap::from([
        ("precision".to_string(), r.precision),
        ("recall".to_string(), r.recall),
        ("f1".to_string(), r.f1()),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_is_stable_and_round_trips() {
        let mut report = Report::new("wer");
        report.corpus = error_rate_scores(&ErrorRateReport {
            substitutions: 1,
            insertions: 0,
            deletions: 2,
            ref_len: 30,
        });
        report.utterances.push(UtteranceScores {
            id: "utt_0000.wav".to_string(),
            scores: BTreeMap::from([("rate".to_string(), 0.0)]),
        });
        let json = report.to_json();
        assert_eq!(json, report.to_json());
        let back: Report = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
        // Spot-check the documented keys are present verbatim.
        for key in ["\"rate\"", "\"substitutions\"", "\"ref_len\"", "\"metric\""] {
            assert!(json.contains(key), "missing {key} in {json}");
        }
    }

    #[test]
    fn writes_to_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        Report::new("bleu").write(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"metric\": \"bleu\""));
    }
}
