//! Structured parsing of generated target text.
//!
//! Generated output follows the chain grammar of its task: stage texts
//! joined by `<SEP>`, terminated by `<EOS>`, with timestamp tokens
//! wrapping the stages the chain declares timestamped. This module
//! splits raw output back into labeled stages. It is total and
//! tolerant — model output can be arbitrary — and reports every
//! deviation as a diagnostic instead of failing, so the long-form loop
//! can degrade gracefully.
//!
//! Stage assignment is positional: targets are machine-built with a
//! fixed chain per task, so position is authoritative and keyword
//! matching would only add fragility.

use alloc::string::String;
use alloc::vec::Vec;

use crate::prompt::{Stage, TaskKind, EOS, SEP};
use crate::timestamp::{parse_timestamped, ParseDiagnostic, TimePoint, TimedSegment};

/// One parsed chain stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageOutput {
    pub stage: Stage,
    /// Stage text without timestamp tokens.
    pub text: String,
    /// Window-local segments for stages the chain declares timestamped;
    /// `None` for plain stages.
    pub segments: Option<Vec<TimedSegment>>,
}

/// Everything recovered from one generated string.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChainStages {
    /// Parsed stages, at most as many as the task chain declares.
    pub stages: Vec<StageOutput>,
    pub diagnostics: Vec<ChainDiagnostic>,
    /// Was the output properly terminated?
    pub saw_eos: bool,
    /// Final time token anywhere in the output; the long-form loop
    /// advances its cursor here.
    pub last_time: Option<TimePoint>,
}

impl ChainStages {
    /// Text of the given stage, if it was produced.
    pub fn stage_text(&self, stage: Stage) -> Option<&str> {
        self.stages.iter().find(|s| s.stage == stage).map(|s| s.text.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChainDiagnostic {
    /// Fewer `<SEP>`-delimited groups than the chain declares.
    MissingStages { expected: usize, got: usize },
    /// More groups than declared; the surplus is preserved here, never
    /// silently merged into a stage.
    SurplusStages { expected: usize, dropped: Vec<String> },
    /// A declared stage came out empty.
    EmptyStage { index: usize },
    /// Timestamp-level problem inside a stage.
    Timestamp { stage_index: usize, issue: ParseDiagnostic },
    /// A timestamped stage contained no parsable segment; its raw text
    /// is kept with time tokens stripped.
    UnsegmentedStage { index: usize },
}

impl core::fmt::Display for ChainDiagnostic {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ChainDiagnostic::MissingStages { expected, got } => {
                write!(f, "chain produced {got} of {expected} stages")
            }
            ChainDiagnostic::SurplusStages { expected, dropped } => {
                write!(f, "{} surplus groups beyond the {expected}-stage chain", dropped.len())
            }
            ChainDiagnostic::EmptyStage { index } => write!(f, "stage {index} is empty"),
            ChainDiagnostic::Timestamp { stage_index, issue } => {
                write!(f, "stage {stage_index}: {issue}")
            }
            ChainDiagnostic::UnsegmentedStage { index } => {
                write!(f, "timestamped stage {index} has no parsable segments")
            }
        }
    }
}

/// Split raw generated text into the stages declared by `kind`.
pub fn split_chain(text: &str, kind: TaskKind) -> ChainStages {
    let mut out = ChainStages {
        last_time: parse_timestamped(text).last_time,
        ..ChainStages::default()
    };

    // Tokenize, stop at <EOS>, group by <SEP>.
    let mut groups: Vec<Vec<&str>> = alloc::vec![Vec::new()];
    'outer: for token in text.split_whitespace() {
        if token == EOS {
            out.saw_eos = true;
            break 'outer;
        }
        if token == SEP {
            groups.push(Vec::new());
        } else {
            groups.last_mut().expect("never empty").push(token);
        }
    }
    // A bare/empty generation is one empty group, i.e. zero stages.
    if groups.len() == 1 && groups[0].is_empty() {
        groups.clear();
    }

    let chain = kind.chain();
    if groups.len() < chain.len() {
        out.diagnostics.push(ChainDiagnostic::MissingStages {
            expected: chain.len(),
            got: groups.len(),
        });
    }
    if groups.len() > chain.len() {
        let dropped = groups.split_off(chain.len());
        out.diagnostics.push(ChainDiagnostic::SurplusStages {
            expected: chain.len(),
            dropped: dropped.iter().map(|g| g.join(" ")).collect(),
        });
    }

    for (index, ((stage, timestamped), group)) in chain.iter().zip(&groups).enumerate() {
        let raw = group.join(" ");
        let stage_out = if *timestamped {
            let parsed = parse_timestamped(&raw);
            for issue in parsed.diagnostics {
                out.diagnostics
                    .push(ChainDiagnostic::Timestamp { stage_index: index, issue });
            }
            if parsed.segments.is_empty() {
                out.diagnostics.push(ChainDiagnostic::UnsegmentedStage { index });
                StageOutput {
                    stage: *stage,
                    text: strip_time_tokens(&raw),
                    segments: Some(Vec::new()),
                }
            } else {
                let texts: Vec<&str> =
                    parsed.segments.iter().map(|s| s.text.as_str()).collect();
                StageOutput {
                    stage: *stage,
                    text: texts.join(" "),
                    segments: Some(parsed.segments),
                }
            }
        } else {
            StageOutput { stage: *stage, text: raw, segments: None }
        };
        if stage_out.text.is_empty() {
            out.diagnostics.push(ChainDiagnostic::EmptyStage { index });
        }
        out.stages.push(stage_out);
    }
    out
}

/// Remove well-formed time tokens, keeping all other text.
fn strip_time_tokens(text: &str) -> String {
    let kept: Vec<&str> = text
        .split_whitespace()
        .filter(|tok| !(tok.starts_with("<|") && tok.ends_with("|>")))
        .collect();
    kept.join(" ")
}
