//! Sliding-window decoding of arbitrarily long audio.
//!
//! The model itself only ever sees one bounded window (at most
//! [`crate::timestamp::MAX_INDEX`] quanta, i.e. 30 s by default). This
//! module turns that bounded engine into a stream decoder: slice a
//! window at the cursor, generate, parse, shift the window-local
//! segment times into stream time, then move the cursor to the last
//! time token the window produced and repeat. Untimed tails of a
//! window are thereby re-presented at the start of the next one, so no
//! audio is skipped as long as the generator keeps emitting
//! timestamps.
//!
//! The loop is written against the [`Generator`] trait rather than the
//! model directly, so its control flow can be tested exhaustively with
//! scripted generators ([`ScriptedGenerator`]) and driven by the real
//! network ([`ModelGenerator`]) with the same code path.
//!
//! Robustness rules, in decoding order:
//! - A window whose output carries no time token (or whose final time
//!   is 0.00) cannot position the cursor; the loop advances past the
//!   whole slice and records [`DecodeDiagnostic::FallbackAdvance`].
//! - A final time beyond the slice cannot be trusted either; the
//!   advance is capped at the slice length
//!   ([`DecodeDiagnostic::OverrunAdvance`]).
//! - Segments are clipped to the slice ([`DecodeDiagnostic::Clipped`])
//!   and dropped when nothing of them lies inside it
//!   ([`DecodeDiagnostic::Dropped`]), so emitted times never exceed
//!   the audio that was actually presented.
//! - Every iteration advances the cursor by at least one time quantum,
//!   so decoding always terminates.

use alloc::string::String;
use alloc::vec::Vec;

use crate::audio::{Audio, AudioError};
use crate::model::{GenerateOptions, RunError, TrainedModel};
use crate::parse::{split_chain, ChainDiagnostic, StageOutput};
use crate::prompt::{Stage, TaskKind, TaskSpec};
use crate::timestamp::{TimedSegment, QUANTUM_SECONDS};

/// Maps one audio window plus its rendered task to raw generated text.
///
/// Implementations must be deterministic: the same (audio, task) pair
/// yields the same text. `&mut self` exists so mocks can keep replay
/// state, not for hidden nondeterminism.
pub trait Generator {
    fn generate(&mut self, audio: &Audio, task: &TaskSpec) -> Result<String, RunError>;
}

/// Controls for [`decode_long`].
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOptions {
    /// Task decoded in every window.
    pub task: TaskKind,
    /// Window length in seconds; the final window may be shorter.
    pub window_seconds: f64,
    /// Feed previously decoded sentences to the next window's prompt?
    pub use_context: bool,
    /// How many of the most recent sentences to feed.
    pub context_depth: usize,
}

impl DecodeOptions {
    pub fn new(task: TaskKind) -> Self {
        Self { task, window_seconds: 30.0, use_context: true, context_depth: 2 }
    }
}

/// Why a decode run could not produce a session.
#[derive(Debug, Clone, PartialEq)]
pub enum DecodeError {
    /// The generator failed; `cursor` is the stream position of the
    /// window being decoded.
    Generator { cursor: f64, source: RunError },
    /// Slicing the input failed (empty audio, bad boundaries).
    Audio(AudioError),
    /// Unusable options.
    BadOptions(&'static str),
}

impl core::fmt::Display for DecodeError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            DecodeError::Generator { cursor, source } => {
                write!(f, "generation failed at {cursor:.2} s: {source}")
            }
            DecodeError::Audio(e) => write!(f, "audio: {e}"),
            DecodeError::BadOptions(msg) => write!(f, "bad decode options: {msg}"),
        }
    }
}

impl core::error::Error for DecodeError {}

impl From<AudioError> for DecodeError {
    fn from(e: AudioError) -> Self {
        DecodeError::Audio(e)
    }
}

/// Non-fatal events observed while decoding, tagged with the index of
/// the window (0-based) that produced them.
#[derive(Debug, Clone, PartialEq)]
pub enum DecodeDiagnostic {
    /// No usable final time token; the cursor skipped the whole slice.
    FallbackAdvance { window: usize, cursor: f64 },
    /// Final time token overshot the slice; advance capped at its end.
    OverrunAdvance { window: usize, last_time: f64, limit: f64 },
    /// A segment reached past the slice and was cut at its end.
    /// `start`/`end` are window-local, pre-clip.
    Clipped { window: usize, stage: Stage, start: f64, end: f64, limit: f64 },
    /// A segment lay entirely outside the slice and was discarded.
    Dropped { window: usize, stage: Stage, start: f64, end: f64 },
    /// The window's output never reached `<EOS>` (budget exhausted);
    /// its final sentence is treated as incomplete.
    MissingEos { window: usize },
    /// Structural problem reported by the output parser.
    Chain { window: usize, issue: ChainDiagnostic },
}

impl core::fmt::Display for DecodeDiagnostic {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            DecodeDiagnostic::FallbackAdvance { window, cursor } => {
                write!(f, "window {window}: no usable time token, skipped to {cursor:.2} s")
            }
            DecodeDiagnostic::OverrunAdvance { window, last_time, limit } => {
                write!(f, "window {window}: final time {last_time:.2} s beyond slice, capped at {limit:.2} s")
            }
            DecodeDiagnostic::Clipped { window, stage, end, limit, .. } => {
                write!(f, "window {window}: {stage:?} segment ends {end:.2} s, clipped to {limit:.2} s")
            }
            DecodeDiagnostic::Dropped { window, stage, start, .. } => {
                write!(f, "window {window}: {stage:?} segment starting {start:.2} s is outside the slice")
            }
            DecodeDiagnostic::MissingEos { window } => {
                write!(f, "window {window}: output not terminated")
            }
            DecodeDiagnostic::Chain { window, issue } => write!(f, "window {window}: {issue}"),
        }
    }
}

/// One chain stage accumulated across all windows, in stream time.
#[derive(Debug, Clone, PartialEq)]
pub struct StageTrack {
    pub stage: Stage,
    /// Global-time segments, in emission order, for stages the task
    /// declares timestamped; empty for plain stages.
    pub segments: Vec<TimedSegment>,
    /// Per-window stage texts, in window order (empty entries for
    /// windows that did not produce this stage).
    pub texts: Vec<String>,
}

impl StageTrack {
    /// All window texts joined into one stream-level string.
    pub fn text(&self) -> String {
        let parts: Vec<&str> =
            self.texts.iter().map(String::as_str).filter(|t| !t.is_empty()).collect();
        parts.join(" ")
    }
}

/// Raw record of one decoded window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowRecord {
    /// Stream time where the window starts.
    pub cursor: f64,
    /// Slice length in seconds (`window_seconds`, or the remainder).
    pub length: f64,
    /// Unparsed generator output.
    pub raw: String,
    /// How far the cursor moved after this window.
    pub advanced_by: f64,
    /// Did this window advance by fallback rather than by a time token?
    pub fallback: bool,
}

/// Everything produced by one [`decode_long`] run.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeSession {
    pub task: TaskKind,
    /// Input duration in seconds.
    pub duration: f64,
    /// Cursor trace: starts at 0.0, one entry appended after every
    /// window, final entry ≥ `duration`.
    pub cursors: Vec<f64>,
    pub windows: Vec<WindowRecord>,
    /// One track per chain stage of the task, in chain order.
    pub stages: Vec<StageTrack>,
    pub diagnostics: Vec<DecodeDiagnostic>,
}

impl DecodeSession {
    /// Track of the given stage, if the task's chain declares it.
    pub fn stage(&self, stage: Stage) -> Option<&StageTrack> {
        self.stages.iter().find(|t| t.stage == stage)
    }

    /// Global segments of the task's final stage — the stream-level
    /// result (translation for ST tasks, transcription for ASR).
    pub fn final_segments(&self) -> &[TimedSegment] {
        self.stages.last().map_or(&[], |t| &t.segments)
    }
}

/// Comparisons against the stream end tolerate sub-quantum float dust.
const EDGE_EPS: f64 = 1e-9;

/// Decode `audio` window by window until the cursor passes its end.
///
/// Each iteration slices `opts.window_seconds` of audio at the cursor
/// (less at the stream end), asks the generator for that window's
/// output, splits it into chain stages, shifts segment times by the
/// cursor, and advances the cursor to the window's final time token —
/// or past the whole slice when there is none. Sentences decoded for
/// the task's final stage are carried into the next window's prompt
/// when `opts.use_context` is set, newest last, at most
/// `opts.context_depth` of them; a window without `<EOS>` contributes
/// all but its final (possibly cut-off) sentence.
///
/// Errors from the generator abort the run with the cursor position;
/// everything else degrades into [`DecodeDiagnostic`]s.
pub fn decode_long<G: Generator>(
    generator: &mut G,
    audio: &Audio,
    opts: &DecodeOptions,
) -> Result<DecodeSession, DecodeError> {
    if !opts.window_seconds.is_finite() || opts.window_seconds < QUANTUM_SECONDS {
        return Err(DecodeError::BadOptions("window must be at least one time quantum"));
    }
    if audio.samples.is_empty() {
        return Err(DecodeError::Audio(AudioError::SliceOutOfRange {
            start: 0.0,
            duration: 0.0,
        }));
    }

    let duration = audio.duration();
    let chain = opts.task.chain();
    let mut session = DecodeSession {
        task: opts.task,
        duration,
        cursors: alloc::vec![0.0],
        windows: Vec::new(),
        stages: chain
            .iter()
            .map(|(stage, _)| StageTrack {
                stage: *stage,
                segments: Vec::new(),
                texts: Vec::new(),
            })
            .collect(),
        diagnostics: Vec::new(),
    };
    let mut context: Vec<String> = Vec::new();
    let mut cursor = 0.0;

    while cursor < duration - EDGE_EPS {
        let window = session.windows.len();
        let length = opts.window_seconds.min(duration - cursor);
        let slice = audio.slice(cursor, length)?;

        let mut task = TaskSpec::new(opts.task);
        if opts.use_context {
            task = task.with_context(context.clone());
        }
        let raw = generator
            .generate(&slice, &task)
            .map_err(|source| DecodeError::Generator { cursor, source })?;

        let parsed = split_chain(&raw, opts.task);
        for issue in parsed.diagnostics {
            session.diagnostics.push(DecodeDiagnostic::Chain { window, issue });
        }
        if !parsed.saw_eos {
            session.diagnostics.push(DecodeDiagnostic::MissingEos { window });
        }

        // Move each produced stage into stream time. Stages the window
        // failed to produce still get an empty text slot so `texts`
        // stays aligned with window indices.
        for track in &mut session.stages {
            let produced = parsed.stages.iter().find(|s| s.stage == track.stage);
            track.texts.push(produced.map_or_else(String::new, |s| s.text.clone()));
            let Some(StageOutput { segments: Some(segments), .. }) = produced else {
                continue;
            };
            for seg in segments {
                if seg.start >= length - EDGE_EPS {
                    session.diagnostics.push(DecodeDiagnostic::Dropped {
                        window,
                        stage: track.stage,
                        start: seg.start,
                        end: seg.end,
                    });
                    continue;
                }
                let mut kept = seg.clone();
                if kept.end > length + EDGE_EPS {
                    session.diagnostics.push(DecodeDiagnostic::Clipped {
                        window,
                        stage: track.stage,
                        start: kept.start,
                        end: kept.end,
                        limit: length,
                    });
                    kept.end = length;
                }
                track.segments.push(kept.offset(cursor));
            }
        }

        // Refresh the rolling context from the final stage's sentences.
        if opts.use_context {
            if let Some(last) = parsed.stages.iter().rev().find(|s| s.stage == chain.last().expect("chains are non-empty").0) {
                let mut sentences: Vec<String> = match &last.segments {
                    Some(segs) => segs.iter().map(|s| s.text.clone()).collect(),
                    None if last.text.is_empty() => Vec::new(),
                    None => alloc::vec![last.text.clone()],
                };
                if !parsed.saw_eos {
                    sentences.pop();
                }
                context.extend(sentences);
                let excess = context.len().saturating_sub(opts.context_depth);
                context.drain(..excess);
            }
        }

        // Advance: trust the final time token when it is usable,
        // otherwise skip the slice. Never move less than one quantum.
        let last_time = parsed.last_time.map(|t| t.seconds()).filter(|t| *t > 0.0);
        let fallback = last_time.is_none();
        let mut advance = match last_time {
            Some(t) if t > length + EDGE_EPS => {
                session.diagnostics.push(DecodeDiagnostic::OverrunAdvance {
                    window,
                    last_time: t,
                    limit: length,
                });
                length
            }
            Some(t) => t,
            None => length,
        };
        advance = advance.max(QUANTUM_SECONDS);
        cursor += advance;
        if fallback {
            session.diagnostics.push(DecodeDiagnostic::FallbackAdvance { window, cursor });
        }
        session.windows.push(WindowRecord {
            cursor: cursor - advance,
            length,
            raw,
            advanced_by: advance,
            fallback,
        });
        session.cursors.push(cursor);
    }
    Ok(session)
}

/// Replays a fixed script, one entry per window, and empty text once
/// the script runs out — which the loop treats as a fallback window, so
/// an exhausted script can never hang a decode.
#[derive(Debug, Clone)]
pub struct ScriptedGenerator {
    script: Vec<String>,
    served: usize,
}

impl ScriptedGenerator {
    pub fn new<S: Into<String>>(script: impl IntoIterator<Item = S>) -> Self {
        Self { script: script.into_iter().map(Into::into).collect(), served: 0 }
    }

    /// Windows served so far, including any past the end of the script.
    pub fn served(&self) -> usize {
        self.served
    }

    /// Was the generator asked for more windows than it was given?
    pub fn exhausted(&self) -> bool {
        self.served > self.script.len()
    }
}

impl Generator for ScriptedGenerator {
    fn generate(&mut self, _audio: &Audio, _task: &TaskSpec) -> Result<String, RunError> {
        let out = self.script.get(self.served).cloned().unwrap_or_default();
        self.served += 1;
        Ok(out)
    }
}

/// Drives [`decode_long`] with a trained model.
#[derive(Debug, Clone)]
pub struct ModelGenerator<'a> {
    model: &'a TrainedModel,
    opts: GenerateOptions,
}

impl<'a> ModelGenerator<'a> {
    pub fn new(model: &'a TrainedModel, opts: GenerateOptions) -> Self {
        Self { model, opts }
    }
}

impl Generator for ModelGenerator<'_> {
    fn generate(&mut self, audio: &Audio, task: &TaskSpec) -> Result<String, RunError> {
        // Truncated output simply lacks <EOS>; the loop reports it as a
        // MissingEos diagnostic, so it is not an error here.
        Ok(self.model.respond(Some(audio), task, &self.opts)?.text)
    }
}
