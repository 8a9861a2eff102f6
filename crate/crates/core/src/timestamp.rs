//! Timestamp token codec.
//!
//! Times are quantized to a 20 ms grid over a window-local range of
//! [0, 30] seconds, giving exactly 1501 timestamp tokens. The token
//! surface form is `<|s.ss|>` with two fixed decimals; it is shared
//! bit-exactly between the model vocabulary, the prompt targets and the
//! long-form decode loop.
//!
//! Encoding is strict (callers build segments, so malformed input is a
//! bug), parsing is tolerant (model output may be arbitrary) and reports
//! malformed fragments as diagnostics instead of failing.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::math;

/// Width of one quantization step.
pub const QUANTUM_SECONDS: f64 = 0.02;

/// Largest valid timestamp index; covers 30.00 s of window-local time.
pub const MAX_INDEX: u16 = 1500;

/// Number of distinct timestamp tokens (`<|0.00|>` through `<|30.00|>`).
pub const NUM_TIME_TOKENS: usize = MAX_INDEX as usize + 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeError {
    /// Time below zero (beyond float-noise tolerance).
    Negative(f64),
    /// Time does not round into the [0, 30.00] s window.
    BeyondWindow(f64),
}

impl core::fmt::Display for TimeError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            TimeError::Negative(t) => write!(f, "time {t} s is negative"),
            TimeError::BeyondWindow(t) => {
                write!(f, "time {t} s is outside the [0, 30.00] s window")
            }
        }
    }
}

impl core::error::Error for TimeError {}

/// A point on the 20 ms grid, window-local.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimePoint {
    index: u16,
}

impl TimePoint {
    pub fn from_index(index: u16) -> Result<Self, TimeError> {
        if index > MAX_INDEX {
            return Err(TimeError::BeyondWindow(f64::from(index) * QUANTUM_SECONDS));
        }
        Ok(Self { index })
    }

    pub fn index(self) -> u16 {
        self.index
    }

    pub fn seconds(self) -> f64 {
        f64::from(self.index) * QUANTUM_SECONDS
    }

    /// Token surface form, e.g. `<|1.24|>`. Rendered from integer
    /// centiseconds so the text never depends on float formatting.
    pub fn token(self) -> String {
        let centis = u32::from(self.index) * 2;
        format!("<|{}.{:02}|>", centis / 100, centis % 100)
    }
}

/// Quantize a window-local time to the nearest 20 ms, ties rounding half
/// up. Accepts anything that rounds into the token range.
pub fn quantize(t: f64) -> Result<TimePoint, TimeError> {
    if t < -1e-9 {
        return Err(TimeError::Negative(t));
    }
    let t = t.max(0.0);
    // Small bias keeps exact-half ties (which are not representable
    // exactly in binary) rounding up instead of falling either way.
    let index = math::floor(t / QUANTUM_SECONDS + 0.5 + 1e-9);
    if index > f64::from(MAX_INDEX) {
        return Err(TimeError::BeyondWindow(t));
    }
    Ok(TimePoint { index: index as u16 })
}

/// A timestamped span of text. Times are seconds; window-local when the
/// segment sits inside a decode window, global once the long-form loop
/// has offset it by the window cursor.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TimedSegment {
    pub start: f64,
    pub end: f64,
    pub text: String,
}

impl TimedSegment {
    pub fn new(start: f64, end: f64, text: impl Into<String>) -> Self {
        Self { start, end, text: text.into() }
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    /// Same segment shifted by `offset` seconds.
    pub fn offset(&self, offset: f64) -> Self {
        Self { start: self.start + offset, end: self.end + offset, text: self.text.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EncodeError {
    /// Segment list not sorted, or segments overlap.
    Unordered { index: usize },
    /// Segment with empty text cannot be emitted.
    EmptyText { index: usize },
    /// Segment text embeds a `<|` marker which would corrupt the framing.
    ReservedMarker { index: usize },
    Time(TimeError),
}

impl core::fmt::Display for EncodeError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            EncodeError::Unordered { index } => {
                write!(f, "segment {index} is unsorted or overlaps its predecessor")
            }
            EncodeError::EmptyText { index } => write!(f, "segment {index} has empty text"),
            EncodeError::ReservedMarker { index } => {
                write!(f, "segment {index} text contains the reserved '<|' marker")
            }
            EncodeError::Time(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for EncodeError {}

impl From<TimeError> for EncodeError {
    fn from(e: TimeError) -> Self {
        EncodeError::Time(e)
    }
}

/// Render sorted, non-overlapping window-local segments as
/// `<|s.ss|> text <|e.ee|>` spans joined by single spaces.
pub fn encode_segments(segments: &[TimedSegment]) -> Result<String, EncodeError> {
    let mut out = String::new();
    let mut prev_end: Option<TimePoint> = None;
    for (i, seg) in segments.iter().enumerate() {
        let text = seg.text.trim();
        if text.is_empty() {
            return Err(EncodeError::EmptyText { index: i });
        }
        if text.contains("<|") {
            return Err(EncodeError::ReservedMarker { index: i });
        }
        let start = quantize(seg.start)?;
        let end = quantize(seg.end)?;
        if end < start {
            return Err(EncodeError::Unordered { index: i });
        }
        if let Some(prev) = prev_end {
            if start < prev {
                return Err(EncodeError::Unordered { index: i });
            }
        }
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(&start.token());
        out.push(' ');
        out.push_str(text);
        out.push(' ');
        out.push_str(&end.token());
        prev_end = Some(end);
    }
    Ok(out)
}

/// Problems found while parsing model output. None of these abort the
/// parse; the loop degrades gracefully instead.
#[derive(Debug, Clone, PartialEq)]
pub enum ParseDiagnostic {
    /// A segment closed at a time earlier than it opened.
    DecreasingPair { start: TimePoint, end: TimePoint },
    /// Two adjacent time tokens with nothing between them.
    EmptyPair { at: TimePoint },
    /// Text followed a closing token (or preceded the first opening one)
    /// in a string that does contain time tokens.
    StrayText { text: String },
    /// An opening token was never closed.
    Unterminated { start: TimePoint },
    /// A syntactically valid token whose value is outside [0, 30.00].
    OutOfRange { raw: String },
}

impl core::fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ParseDiagnostic::DecreasingPair { start, end } => write!(
                f,
                "decreasing pair: {} before {}",
                start.token(),
                end.token()
            ),
            ParseDiagnostic::EmptyPair { at } => write!(f, "empty pair at {}", at.token()),
            ParseDiagnostic::StrayText { text } => write!(f, "stray text: {text:?}"),
            ParseDiagnostic::Unterminated { start } => {
                write!(f, "unterminated segment opened at {}", start.token())
            }
            ParseDiagnostic::OutOfRange { raw } => write!(f, "out-of-range token {raw}"),
        }
    }
}

/// Result of tolerant timestamp parsing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParseOutcome {
    /// Well-formed `(open, text, close)` spans, in input order.
    pub segments: Vec<TimedSegment>,
    /// The final time token anywhere in the string, paired or not.
    pub last_time: Option<TimePoint>,
    pub diagnostics: Vec<ParseDiagnostic>,
}

enum Piece<'a> {
    Text(&'a str),
    Time(TimePoint),
    BadTime(String),
}

/// Scan one whitespace-delimited chunk, which may glue several time
/// tokens together (`<|0.50|><|0.60|>`) or mix text and tokens.
fn scan_chunk<'a>(chunk: &'a str, out: &mut Vec<Piece<'a>>) {
    let mut rest = chunk;
    while !rest.is_empty() {
        match rest.find("<|") {
            None => {
                out.push(Piece::Text(rest));
                return;
            }
            Some(pos) => {
                if pos > 0 {
                    out.push(Piece::Text(&rest[..pos]));
                }
                let tail = &rest[pos..];
                // Search after the opener so "<|>" cannot match its own
                // middle bar as a closer.
                match tail[2..].find("|>").map(|p| p + 2) {
                    None => {
                        // Unclosed marker; treat as literal text.
                        out.push(Piece::Text(tail));
                        return;
                    }
                    Some(close) => {
                        let body = &tail[2..close];
                        match parse_time_body(body) {
                            Some(Ok(tp)) => out.push(Piece::Time(tp)),
                            Some(Err(())) => {
                                out.push(Piece::BadTime(tail[..close + 2].to_string()))
                            }
                            None => out.push(Piece::Text(&tail[..close + 2])),
                        }
                        rest = &tail[close + 2..];
                    }
                }
            }
        }
    }
}

/// `Some(Ok)` for a valid time body, `Some(Err)` for a numeric body out
/// of range, `None` for a body that is not `digits.dd` at all.
fn parse_time_body(body: &str) -> Option<Result<TimePoint, ()>> {
    let (secs, cents) = body.split_once('.')?;
    if secs.is_empty() || secs.len() > 2 || cents.len() != 2 {
        return None;
    }
    if !secs.bytes().all(|b| b.is_ascii_digit()) || !cents.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let secs: u32 = secs.parse().ok()?;
    let cents: u32 = cents.parse().ok()?;
    let centis = secs * 100 + cents;
    if centis > 3000 {
        return Some(Err(()));
    }
    // Odd centiseconds are off-grid; round half up onto the grid.
    let index = (centis + (centis & 1)) / 2;
    Some(Ok(TimePoint { index: index as u16 }))
}

/// Tolerant parser for timestamped text. Extracts every well-formed
/// `(open, text, close)` span, tracks the last time token seen anywhere,
/// and reports malformed fragments rather than dropping them silently.
pub fn parse_timestamped(text: &str) -> ParseOutcome {
    let mut pieces = Vec::new();
    for chunk in text.split_whitespace() {
        scan_chunk(chunk, &mut pieces);
    }

    let mut outcome = ParseOutcome::default();
    let mut open: Option<TimePoint> = None;
    let mut buffer: Vec<&str> = Vec::new();
    let mut stray: Vec<ParseDiagnostic> = Vec::new();

    for piece in &pieces {
        match piece {
            Piece::Text(t) => buffer.push(t),
            Piece::BadTime(raw) => outcome
                .diagnostics
                .push(ParseDiagnostic::OutOfRange { raw: raw.clone() }),
            Piece::Time(tp) => {
                outcome.last_time = Some(*tp);
                match open {
                    None => {
                        if !buffer.is_empty() {
                            stray.push(ParseDiagnostic::StrayText { text: buffer.join(" ") });
                            buffer.clear();
                        }
                        open = Some(*tp);
                    }
                    Some(start) => {
                        if buffer.is_empty() {
                            outcome.diagnostics.push(ParseDiagnostic::EmptyPair { at: start });
                            open = Some(*tp);
                        } else if *tp < start {
                            outcome
                                .diagnostics
                                .push(ParseDiagnostic::DecreasingPair { start, end: *tp });
                            buffer.clear();
                            open = Some(*tp);
                        } else {
                            outcome.segments.push(TimedSegment {
                                start: start.seconds(),
                                end: tp.seconds(),
                                text: buffer.join(" "),
                            });
                            buffer.clear();
                            open = None;
                        }
                    }
                }
            }
        }
    }

    match open {
        Some(start) => outcome
            .diagnostics
            .push(ParseDiagnostic::Unterminated { start }),
        None => {
            if !buffer.is_empty() && outcome.last_time.is_some() {
                stray.push(ParseDiagnostic::StrayText { text: buffer.join(" ") });
            }
        }
    }

    // Plain untimestamped text is a normal output shape, not a defect:
    // only report stray fragments when time tokens were present at all.
    if outcome.last_time.is_some() {
        outcome.diagnostics.extend(stray);
    }
    outcome
}
