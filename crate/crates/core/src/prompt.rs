//! Instruction templates and chain-of-thought training targets.
//!
//! Each task kind has exactly one instruction template. Audio tasks
//! carry the `[SpeechRepr]` marker, which the model replaces with the
//! encoded audio prefix; text tasks splice their input text directly
//! into the prompt. Preceding-sentence context, when present, is
//! rendered as a `Context:` prefix before the instruction, so the
//! instruction clause itself is byte-identical with and without context.
//!
//! Targets are chains of stages (transcription, smoothed form,
//! pronunciation, translation, explanation) joined by the reserved
//! `<SEP>` token and terminated by `<EOS>`. Chain-of-thought kinds emit
//! intermediate stages before the final answer; timestamped stages wrap
//! their text in timestamp tokens covering the utterance envelope.
//!
//! The full template catalog is exported to `docs/prompt_templates.txt`
//! and covered by a byte-exact test.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::synth::SynthExample;
use crate::timestamp::{encode_segments, EncodeError, TimedSegment};

/// Placeholder token replaced by the audio prefix at model time.
pub const SPEECH_MARKER: &str = "[SpeechRepr]";

/// Reserved separator between chain stages.
pub const SEP: &str = "<SEP>";

/// Reserved end-of-sequence token terminating every target.
pub const EOS: &str = "<EOS>";

/// Language tags of the synthetic corpus.
pub const SOURCE_LANG: &str = "Tonal";
pub const TARGET_LANG: &str = "English";

/// Every instruction format, one per template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum TaskKind {
    /// Text-to-text machine translation.
    Mt,
    /// Speech recognition.
    Asr,
    /// Direct speech translation.
    StDirect,
    /// Speech translation, "naturally" phrasing.
    StNatural,
    /// Pronunciation of input text.
    PronText,
    /// Pronunciation transcription of speech.
    PronAudio,
    /// Inverse text normalization and smoothing.
    ItnSmooth,
    /// Translation plus explanation.
    TransExplain,
    /// Timestamped speech recognition.
    TsAsr,
    /// Timestamped speech translation.
    TsSt,
    /// Chain of thought: transcribe, then translate.
    CotSt,
    /// Chain of thought: transcribe, then normalize.
    CotItn,
    /// Chain of thought: transcribe, translate, explain.
    CotExplain,
    /// Chain of thought: timestamped transcription, then timestamped
    /// translation.
    CotTsSt,
}

/// All kinds, in catalog order.
pub const ALL_KINDS: [TaskKind; 14] = [
    TaskKind::Mt,
    TaskKind::Asr,
    TaskKind::StDirect,
    TaskKind::StNatural,
    TaskKind::PronText,
    TaskKind::PronAudio,
    TaskKind::ItnSmooth,
    TaskKind::TransExplain,
    TaskKind::TsAsr,
    TaskKind::TsSt,
    TaskKind::CotSt,
    TaskKind::CotItn,
    TaskKind::CotExplain,
    TaskKind::CotTsSt,
];

/// A stage of a chain target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Transcription,
    Smoothed,
    Pronunciation,
    Translation,
    Explanation,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Mt => "mt",
            TaskKind::Asr => "asr",
            TaskKind::StDirect => "st-direct",
            TaskKind::StNatural => "st-natural",
            TaskKind::PronText => "pron-text",
            TaskKind::PronAudio => "pron-audio",
            TaskKind::ItnSmooth => "itn-smooth",
            TaskKind::TransExplain => "trans-explain",
            TaskKind::TsAsr => "ts-asr",
            TaskKind::TsSt => "ts-st",
            TaskKind::CotSt => "cot-st",
            TaskKind::CotItn => "cot-itn",
            TaskKind::CotExplain => "cot-explain",
            TaskKind::CotTsSt => "cot-ts-st",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        ALL_KINDS.iter().copied().find(|k| k.name() == name)
    }

    /// Does the instruction consume audio (as opposed to input text)?
    pub fn needs_audio(self) -> bool {
        !matches!(self, TaskKind::Mt | TaskKind::PronText)
    }

    /// Does the target chain include a terminology gloss? Only
    /// utterances that contain terminology words can serve these tasks.
    pub fn needs_explanation(self) -> bool {
        self.chain().iter().any(|(s, _)| *s == Stage::Explanation)
    }

    /// Stages of the target chain, in emission order, with a flag for
    /// timestamp wrapping.
    pub fn chain(self) -> &'static [(Stage, bool)] {
        use Stage::*;
        match self {
            TaskKind::Mt | TaskKind::StDirect | TaskKind::StNatural => &[(Translation, false)],
            TaskKind::Asr => &[(Transcription, false)],
            TaskKind::PronText | TaskKind::PronAudio => &[(Pronunciation, false)],
            TaskKind::ItnSmooth => &[(Smoothed, false)],
            TaskKind::TransExplain => &[(Translation, false), (Explanation, false)],
            TaskKind::TsAsr => &[(Transcription, true)],
            TaskKind::TsSt => &[(Translation, true)],
            TaskKind::CotSt => &[(Transcription, false), (Translation, false)],
            TaskKind::CotItn => &[(Transcription, false), (Smoothed, false)],
            TaskKind::CotExplain => {
                &[(Transcription, false), (Translation, false), (Explanation, false)]
            }
            TaskKind::CotTsSt => &[(Transcription, true), (Translation, true)],
        }
    }

    /// Instruction template with `{text}`, `{source}` and `{target}`
    /// placeholders, exactly as listed in the exported catalog.
    pub fn template(self) -> &'static str {
        match self {
            TaskKind::Mt => "{text} Translate the text into {target}:",
            TaskKind::Asr => "[SpeechRepr] Transcribe the speech into {source}:",
            TaskKind::StDirect => "[SpeechRepr] Translate speech into {target}:",
            TaskKind::StNatural => "[SpeechRepr] Translate speech into {target} naturally:",
            TaskKind::PronText => "{text} Translate the text to {source} phonemes:",
            TaskKind::PronAudio => "[SpeechRepr] Transcribe the speech into {source} phonemes:",
            TaskKind::ItnSmooth => "[SpeechRepr] Transcribe the speech to standard {source}:",
            TaskKind::TransExplain => {
                "[SpeechRepr] Translate the speech into {target} and explain it:"
            }
            TaskKind::TsAsr => {
                "[SpeechRepr] Transcribe the speech to {source} text with timestamp:"
            }
            TaskKind::TsSt => {
                "[SpeechRepr] Translate the speech to {target} text with timestamp:"
            }
            TaskKind::CotSt => "[SpeechRepr] Transcribe speech and translate it into {target}:",
            TaskKind::CotItn => {
                "[SpeechRepr] Transcribe the speech and then perform inverse text normalization:"
            }
            TaskKind::CotExplain => {
                "[SpeechRepr] Transcribe speech, translate it into {target} and explain the translation:"
            }
            TaskKind::CotTsSt => {
                "[SpeechRepr] Transcribe the speech and then translate it to {target} text with timestamp:"
            }
        }
    }
}

/// A concrete task instance: which instruction to render, for which
/// language pair, with what text input and context.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub source_lang: String,
    pub target_lang: String,
    /// Input text for the text-driven kinds ([`TaskKind::needs_audio`]
    /// is false); ignored otherwise.
    pub text: Option<String>,
    /// Preceding target-language sentences, oldest first.
    pub context: Vec<String>,
}

impl TaskSpec {
    /// Task over the corpus language pair, no context, no input text.
    pub fn new(kind: TaskKind) -> Self {
        Self {
            kind,
            source_lang: SOURCE_LANG.to_string(),
            target_lang: TARGET_LANG.to_string(),
            text: None,
            context: Vec::new(),
        }
    }

    pub fn with_context(mut self, context: Vec<String>) -> Self {
        self.context = context;
        self
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.text = Some(text.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PromptError {
    /// Text-driven kind without input text.
    MissingText { kind: TaskKind },
    /// The example lacks a stage the chain needs (only explanations can
    /// be absent).
    MissingExplanation,
    /// Timestamped target for an utterance without word spans.
    NoSpans,
    Encode(EncodeError),
}

impl core::fmt::Display for PromptError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            PromptError::MissingText { kind } => {
                write!(f, "task {} requires input text", kind.name())
            }
            PromptError::MissingExplanation => {
                write!(f, "example has no explanation to train on")
            }
            PromptError::NoSpans => write!(f, "example has no word spans to timestamp"),
            PromptError::Encode(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for PromptError {}

impl From<EncodeError> for PromptError {
    fn from(e: EncodeError) -> Self {
        PromptError::Encode(e)
    }
}

/// Render the instruction prompt for a task. The `[SpeechRepr]` marker
/// stays in place for audio kinds; context becomes a `Context:` prefix.
pub fn build_instruction(spec: &TaskSpec) -> Result<String, PromptError> {
    let mut body = spec.kind.template().to_string();
    if body.contains("{text}") {
        let text = spec
            .text
            .as_deref()
            .ok_or(PromptError::MissingText { kind: spec.kind })?;
        body = body.replace("{text}", text);
    }
    body = body
        .replace("{source}", &spec.source_lang)
        .replace("{target}", &spec.target_lang);
    if spec.context.is_empty() {
        Ok(body)
    } else {
        Ok(format!("Context: {} {}", spec.context.join(" "), body))
    }
}

/// The utterance envelope (first onset to last offset) carrying `text`,
/// rendered through the timestamp codec.
fn timestamped(text: &str, spans: &[TimedSegment]) -> Result<String, PromptError> {
    let first = spans.first().ok_or(PromptError::NoSpans)?;
    let last = spans.last().expect("non-empty");
    let seg = TimedSegment::new(first.start, last.end, text);
    Ok(encode_segments(core::slice::from_ref(&seg))?)
}

fn stage_text(stage: Stage, ex: &SynthExample) -> Result<&str, PromptError> {
    Ok(match stage {
        Stage::Transcription => &ex.transcript,
        Stage::Smoothed => &ex.smoothed,
        Stage::Pronunciation => &ex.pronunciation,
        Stage::Translation => &ex.translation,
        Stage::Explanation => {
            ex.explanation.as_deref().ok_or(PromptError::MissingExplanation)?
        }
    })
}

/// Render the training target for a task on an example: chain stages
/// joined by `<SEP>`, terminated by `<EOS>`.
pub fn build_target(spec: &TaskSpec, ex: &SynthExample) -> Result<String, PromptError> {
    let mut parts = Vec::new();
    for (stage, with_time) in spec.kind.chain() {
        let text = stage_text(*stage, ex)?;
        if *with_time {
            parts.push(timestamped(text, &ex.word_spans)?);
        } else {
            parts.push(text.to_string());
        }
    }
    Ok(format!("{} {EOS}", parts.join(&format!(" {SEP} "))))
}

/// The TaskSpec that pairs `kind` with a corpus example: input text for
/// text kinds comes from the transcript, and the example's context is
/// attached when `with_context` is set.
pub fn task_for_example(kind: TaskKind, ex: &SynthExample, with_context: bool) -> TaskSpec {
    let mut spec = TaskSpec::new(kind);
    if !kind.needs_audio() {
        spec = spec.with_text(ex.transcript.clone());
    }
    if with_context {
        spec = spec.with_context(ex.context.clone());
    }
    spec
}

/// The full template catalog as exported to `docs/prompt_templates.txt`.
pub fn template_catalog() -> String {
    let mut out = String::from(
        "Instruction templates. {text} is the input text of text-driven tasks,\n\
         {source}/{target} are language tags, [SpeechRepr] marks where the\n\
         encoded audio prefix is spliced in. With context, prompts gain the\n\
         prefix \"Context: <sentences> \" before the instruction. Targets chain\n\
         the listed stages joined by <SEP> and end with <EOS>; (ts) stages are\n\
         wrapped in timestamp tokens covering the utterance envelope.\n\n",
    );
    for kind in ALL_KINDS {
        let stages: Vec<String> = kind
            .chain()
            .iter()
            .map(|(stage, ts)| {
                let name = match stage {
                    Stage::Transcription => "transcription",
                    Stage::Smoothed => "smoothed",
                    Stage::Pronunciation => "pronunciation",
                    Stage::Translation => "translation",
                    Stage::Explanation => "explanation",
                };
                if *ts {
                    format!("{name} (ts)")
                } else {
                    name.to_string()
                }
            })
            .collect();
        out.push_str(&format!(
            "{}\n  prompt: {}\n  target: {}\n\n",
            kind.name(),
            kind.template(),
            stages.join(" <SEP> ")
        ));
    }
    out
}

/// Every whitespace token that instruction rendering can produce for a
/// language pair, across all kinds, with and without context. The model
/// vocabulary includes these.
pub fn instruction_tokens(source_lang: &str, target_lang: &str) -> BTreeSet<String> {
    let mut tokens = BTreeSet::new();
    for kind in ALL_KINDS {
        let mut spec = TaskSpec::new(kind);
        spec.source_lang = source_lang.to_string();
        spec.target_lang = target_lang.to_string();
        // Placeholder text; the real text tokens come from the corpus
        // vocabulary. A single known word keeps rendering valid.
        spec.text = Some("x".to_string());
        let plain = build_instruction(&spec).expect("template renders");
        spec.context = alloc::vec!["x".to_string()];
        let with_ctx = build_instruction(&spec).expect("template renders");
        for s in [plain, with_ctx] {
            tokens.extend(s.split_whitespace().map(|t| t.to_string()).filter(|t| t != "x"));
        }
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_corpus, CorpusSpec, Lexicon};
    use alloc::vec;

    fn example() -> SynthExample {
        let spec = CorpusSpec::new(7, 8, 20).unwrap();
        gen_corpus(&spec).unwrap().remove(0)
    }

    #[test]
    fn frozen_instruction_examples() {
        let st = TaskSpec::new(TaskKind::StNatural);
        assert_eq!(
            build_instruction(&st).unwrap(),
            "[SpeechRepr] Translate speech into English naturally:"
        );
        let cot = TaskSpec::new(TaskKind::CotSt);
        assert_eq!(
            build_instruction(&cot).unwrap(),
            "[SpeechRepr] Transcribe speech and translate it into English:"
        );
        let itn = TaskSpec::new(TaskKind::CotItn);
        assert_eq!(
            build_instruction(&itn).unwrap(),
            "[SpeechRepr] Transcribe the speech and then perform inverse text normalization:"
        );
        let mt = TaskSpec::new(TaskKind::Mt).with_text("kato bemi");
        assert_eq!(
            build_instruction(&mt).unwrap(),
            "kato bemi Translate the text into English:"
        );
        let asr = TaskSpec::new(TaskKind::Asr);
        assert_eq!(
            build_instruction(&asr).unwrap(),
            "[SpeechRepr] Transcribe the speech into Tonal:"
        );
    }

    #[test]
    fn context_is_pure_prefix() {
        for kind in ALL_KINDS {
            let mut spec = TaskSpec::new(kind).with_text("kato");
            let plain = build_instruction(&spec).unwrap();
            spec.context = vec!["otak imeb".to_string(), "adap".to_string()];
            let with_ctx = build_instruction(&spec).unwrap();
            assert_eq!(with_ctx, format!("Context: otak imeb adap {plain}"));
        }
    }

    #[test]
    fn templates_are_distinct() {
        let rendered: BTreeSet<String> = ALL_KINDS
            .iter()
            .map(|k| build_instruction(&TaskSpec::new(*k).with_text("t")).unwrap())
            .collect();
        assert_eq!(rendered.len(), ALL_KINDS.len());
    }

    #[test]
    fn missing_text_rejected() {
        assert_eq!(
            build_instruction(&TaskSpec::new(TaskKind::Mt)).unwrap_err(),
            PromptError::MissingText { kind: TaskKind::Mt }
        );
        assert!(build_instruction(&TaskSpec::new(TaskKind::PronText)).is_err());
        // Audio kinds ignore text entirely.
        assert!(build_instruction(&TaskSpec::new(TaskKind::Asr)).is_ok());
    }

    #[test]
    fn cot_target_chains_stages() {
        let ex = example();
        let target = build_target(&TaskSpec::new(TaskKind::CotSt), &ex).unwrap();
        assert_eq!(target, format!("{} {SEP} {} {EOS}", ex.transcript, ex.translation));
        let target = build_target(&TaskSpec::new(TaskKind::CotItn), &ex).unwrap();
        assert_eq!(target, format!("{} {SEP} {} {EOS}", ex.transcript, ex.smoothed));
    }

    #[test]
    fn timestamped_target_wraps_envelope() {
        let ex = example();
        let target = build_target(&TaskSpec::new(TaskKind::TsAsr), &ex).unwrap();
        let start = ex.word_spans.first().unwrap().start;
        let end = ex.word_spans.last().unwrap().end;
        let expected = encode_segments(&[TimedSegment::new(start, end, ex.transcript.clone())])
            .unwrap();
        assert_eq!(target, format!("{expected} {EOS}"));
        assert!(target.starts_with("<|"));
    }

    #[test]
    fn cot_ts_target_timestamps_both_stages() {
        let ex = example();
        let target = build_target(&TaskSpec::new(TaskKind::CotTsSt), &ex).unwrap();
        let parts: Vec<&str> = target.split(&format!(" {SEP} ")).collect();
        assert_eq!(parts.len(), 2);
        assert!(parts[0].starts_with("<|") && parts[0].ends_with("|>"));
        assert!(parts[1].contains(&ex.translation));
        assert!(target.ends_with(EOS));
    }

    #[test]
    fn explanation_required_when_chained() {
        let mut ex = example();
        ex.explanation = None;
        assert_eq!(
            build_target(&TaskSpec::new(TaskKind::CotExplain), &ex).unwrap_err(),
            PromptError::MissingExplanation
        );
        assert!(build_target(&TaskSpec::new(TaskKind::TransExplain), &ex).is_err());
        // Other kinds are unaffected.
        assert!(build_target(&TaskSpec::new(TaskKind::Asr), &ex).is_ok());
    }

    #[test]
    fn all_kinds_build_targets_over_corpus() {
        let spec = CorpusSpec::new(3, 16, 20).unwrap();
        let lex = Lexicon::from_spec(&spec).unwrap();
        for ex in gen_corpus(&spec).unwrap() {
            for kind in ALL_KINDS {
                let task = task_for_example(kind, &ex, true);
                let instruction = build_instruction(&task).unwrap();
                assert_eq!(instruction.contains(SPEECH_MARKER), kind.needs_audio());
                if ex.explanation.is_none()
                    && kind.chain().iter().any(|(s, _)| *s == Stage::Explanation)
                {
                    assert!(build_target(&task, &ex).is_err());
                    continue;
                }
                let target = build_target(&task, &ex).unwrap();
                assert!(target.ends_with(EOS));
                assert_eq!(
                    target.matches(SEP).count(),
                    kind.chain().len() - 1,
                    "{} target: {target}",
                    kind.name()
                );
                let _ = lex; // corpus text is lexicon-consistent by construction
            }
        }
    }

    #[test]
    fn catalog_matches_exported_file() {
        let exported = include_str!(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../docs/prompt_templates.txt"
        ));
        assert_eq!(template_catalog(), exported);
    }

    #[test]
    fn instruction_tokens_cover_all_templates() {
        let tokens = instruction_tokens(SOURCE_LANG, TARGET_LANG);
        for needle in ["Translate", "Transcribe", "naturally:", "Context:", SPEECH_MARKER] {
            assert!(tokens.contains(needle), "missing {needle}");
        }
        for kind in ALL_KINDS {
            let spec = TaskSpec::new(kind).with_text("kato");
            for tok in build_instruction(&spec).unwrap().split_whitespace() {
                assert!(
                    tok == "kato" || tokens.contains(tok),
                    "{tok} not covered for {}",
                    kind.name()
                );
            }
        }
    }

    #[test]
    fn name_round_trip() {
        for kind in ALL_KINDS {
            assert_eq!(TaskKind::from_name(kind.name()), Some(kind));
        }
        assert_eq!(TaskKind::from_name("nope"), None);
    }
}
