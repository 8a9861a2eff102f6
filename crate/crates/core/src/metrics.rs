//! Translation and timestamp quality metrics.
//!
//! Three metric families: word/character error rate from a uniform-cost
//! edit-distance alignment, corpus-level BLEU (n = 1..4, brevity
//! penalty, no smoothing), and frame-level voice-activity
//! precision/recall/F1 rasterized at the 20 ms timestamp quantum.
//!
//! WER/CER normalize both sides first (lowercase, ASCII punctuation
//! stripped) so that raw transcripts compare fairly against cased and
//! punctuated ones. BLEU deliberately applies no smoothing: a zero
//! n-gram precision zeroes the score, which keeps results reproducible
//! and makes missing 4-grams visible.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::math;
use crate::timestamp::{TimedSegment, QUANTUM_SECONDS};

#[derive(Debug, Clone, PartialEq)]
pub enum MetricError {
    /// Reference is empty after normalization; the error rate divides by
    /// its length.
    EmptyReference,
    /// Corpus lists must pair up one to one.
    LengthMismatch { refs: usize, hyps: usize },
    /// Every hypothesis is empty; BLEU's brevity term divides by the
    /// total hypothesis length.
    EmptyHypotheses,
    /// A segment extends outside the evaluated `[0, duration]` range.
    SegmentOutOfRange { start: f64, end: f64, duration: f64 },
}

impl core::fmt::Display for MetricError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            MetricError::EmptyReference => write!(f, "reference is empty after normalization"),
            MetricError::LengthMismatch { refs, hyps } => {
                write!(f, "corpus size mismatch: {refs} references vs {hyps} hypotheses")
            }
            MetricError::EmptyHypotheses => write!(f, "all hypotheses are empty"),
            MetricError::SegmentOutOfRange { start, end, duration } => write!(
                f,
                "segment [{start}, {end}] outside evaluated range [0, {duration}]"
            ),
        }
    }
}

impl core::error::Error for MetricError {}

/// Counting unit for [`edit_error_rate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    /// Whitespace-delimited tokens (WER).
    Word,
    /// Non-whitespace code points (CER).
    Char,
}

/// Edit-distance alignment summary. `rate` can exceed 1 when the
/// hypothesis inserts more than the reference contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ErrorRateReport {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub ref_len: usize,
}

impl ErrorRateReport {
    pub fn errors(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }

    pub fn rate(&self) -> f64 {
        self.errors() as f64 / self.ref_len as f64
    }
}

/// Precision/recall pair; `f1` is the harmonic mean, 0 when both sides
/// are 0.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PRFReport {
    pub precision: f64,
    pub recall: f64,
}

impl PRFReport {
    pub fn f1(&self) -> f64 {
        let sum = self.precision + self.recall;
        if sum == 0.0 {
            0.0
        } else {
            2.0 * self.precision * self.recall / sum
        }
    }
}

/// Lowercase and strip ASCII punctuation; whitespace is preserved for
/// later tokenization.
pub fn normalize_text(text: &str) -> String {
    text.chars()
        .filter(|c| !c.is_ascii_punctuation())
        .flat_map(|c| c.to_lowercase())
        .collect()
}

fn tokenize(normalized: &str, unit: Unit) -> Vec<String> {
    match unit {
        Unit::Word => normalized.split_whitespace().map(String::from).collect(),
        Unit::Char => normalized
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(String::from)
            .collect(),
    }
}

/// Minimum-edit-distance alignment with unit costs. Tie-break during
/// backtrace: diagonal (match/substitution) first, then deletion, then
/// insertion, so the decomposition is deterministic.
fn align(r: &[String], h: &[String]) -> (usize, usize, usize) {
    let (m, n) = (r.len(), h.len());
    let width = n + 1;
    let mut cost = alloc::vec![0usize; (m + 1) * width];
    for (j, slot) in cost[..width].iter_mut().enumerate() {
        *slot = j;
    }
    for i in 1..=m {
        cost[i * width] = i;
        for j in 1..=n {
            let sub = cost[(i - 1) * width + j - 1] + usize::from(r[i - 1] != h[j - 1]);
            let del = cost[(i - 1) * width + j] + 1;
            let ins = cost[i * width + j - 1] + 1;
            cost[i * width + j] = sub.min(del).min(ins);
        }
    }

    let (mut i, mut j) = (m, n);
    let (mut subs, mut ins, mut dels) = (0, 0, 0);
    while i > 0 || j > 0 {
        let here = cost[i * width + j];
        if i > 0 && j > 0 {
            let diag = cost[(i - 1) * width + j - 1];
            if r[i - 1] == h[j - 1] && here == diag {
                i -= 1;
                j -= 1;
                continue;
            }
            if here == diag + 1 {
                subs += 1;
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && here == cost[(i - 1) * width + j] + 1 {
            dels += 1;
            i -= 1;
            continue;
        }
        ins += 1;
        j -= 1;
    }
    (subs, ins, dels)
}

/// Word or character error rate of `hyp` against `ref_text`. Both sides
/// are normalized first. Errors when the reference normalizes to
/// nothing.
pub fn edit_error_rate(
    ref_text: &str,
    hyp: &str,
    unit: Unit,
) -> Result<ErrorRateReport, MetricError> {
    let r = tokenize(&normalize_text(ref_text), unit);
    let h = tokenize(&normalize_text(hyp), unit);
    if r.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let (substitutions, insertions, deletions) = align(&r, &h);
    Ok(ErrorRateReport { substitutions, insertions, deletions, ref_len: r.len() })
}

const BLEU_MAX_ORDER: usize = 4;

fn ngram_counts<'a>(tokens: &[&'a str], n: usize) -> BTreeMap<Vec<&'a str>, usize> {
    let mut counts = BTreeMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window.to_vec()).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus-level BLEU in [0, 100]: geometric mean of modified n-gram
/// precisions for n = 1..4 with the brevity penalty, single reference
/// per hypothesis, whitespace tokenization, no smoothing.
pub fn corpus_bleu<R: AsRef<str>, H: AsRef<str>>(
    refs: &[R],
    hyps: &[H],
) -> Result<f64, MetricError> {
    if refs.len() != hyps.len() || refs.is_empty() {
        return Err(MetricError::LengthMismatch { refs: refs.len(), hyps: hyps.len() });
    }

    let mut matched = [0usize; BLEU_MAX_ORDER];
    let mut total = [0usize; BLEU_MAX_ORDER];
    let mut ref_len = 0usize;
    let mut hyp_len = 0usize;

    for (r, h) in refs.iter().zip(hyps) {
        let r_tokens: Vec<&str> = r.as_ref().split_whitespace().collect();
        let h_tokens: Vec<&str> = h.as_ref().split_whitespace().collect();
        ref_len += r_tokens.len();
        hyp_len += h_tokens.len();
        for n in 1..=BLEU_MAX_ORDER {
            let r_counts = ngram_counts(&r_tokens, n);
            for (gram, count) in ngram_counts(&h_tokens, n) {
                matched[n - 1] += count.min(r_counts.get(&gram).copied().unwrap_or(0));
                total[n - 1] += count;
            }
        }
    }

    if hyp_len == 0 {
        return Err(MetricError::EmptyHypotheses);
    }

    let mut log_precision_sum = 0.0;
    for n in 0..BLEU_MAX_ORDER {
        if matched[n] == 0 || total[n] == 0 {
            return Ok(0.0);
        }
        log_precision_sum += math::ln(matched[n] as f64 / total[n] as f64);
    }

    let brevity = if hyp_len >= ref_len {
        1.0
    } else {
        math::exp(1.0 - ref_len as f64 / hyp_len as f64)
    };
    Ok(100.0 * brevity * math::exp(log_precision_sum / BLEU_MAX_ORDER as f64))
}

fn num_vad_frames(duration: f64) -> usize {
    math::ceil(duration / QUANTUM_SECONDS - 1e-9).max(0.0) as usize
}

/// Frame occupancy bitmap: frame `f` spans
/// `[f·QUANTUM, (f+1)·QUANTUM)` and is voiced iff some segment overlaps
/// it by more than 1e-9 s.
fn rasterize(segments: &[TimedSegment], frames: usize) -> Vec<bool> {
    let mut voiced = alloc::vec![false; frames];
    for seg in segments {
        for (f, slot) in voiced.iter_mut().enumerate() {
            let fs = f as f64 * QUANTUM_SECONDS;
            let fe = fs + QUANTUM_SECONDS;
            if seg.end.min(fe) - seg.start.max(fs) > 1e-9 {
                *slot = true;
            }
        }
    }
    voiced
}

/// Frame-level voice-activity precision/recall against reference spans,
/// rasterized at the timestamp quantum over `[0, duration]`.
pub fn vad_prf(
    pred: &[TimedSegment],
    reference: &[TimedSegment],
    duration: f64,
) -> Result<PRFReport, MetricError> {
    for seg in pred.iter().chain(reference) {
        if seg.start < -1e-9 || seg.end > duration + 1e-9 || seg.end < seg.start {
            return Err(MetricError::SegmentOutOfRange {
                start: seg.start,
                end: seg.end,
                duration,
            });
        }
    }
    let frames = num_vad_frames(duration);
    let p = rasterize(pred, frames);
    let r = rasterize(reference, frames);
    let both = p.iter().zip(&r).filter(|(a, b)| **a && **b).count();
    let p_total = p.iter().filter(|v| **v).count();
    let r_total = r.iter().filter(|v| **v).count();
    Ok(PRFReport {
        precision: if p_total == 0 { 0.0 } else { both as f64 / p_total as f64 },
        recall: if r_total == 0 { 0.0 } else { both as f64 / r_total as f64 },
    })
}
