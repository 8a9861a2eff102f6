//! Audio-conditioned decoder-only language model.
//!
//! The architecture in one breath: log-mel features pass through two
//! strided convolutions (GELU between), sinusoidal positions, a small
//! bidirectional transformer encoder, and a linear projection; the
//! resulting rows are spliced into the decoder sequence in place of the
//! prompt's speech marker. A causal pre-norm transformer with learned
//! positions models the token stream and is trained with cross-entropy
//! on the target tokens only. Decoding is greedy with a KV cache.
//!
//! Everything is plain `f64` with hand-written backward passes; the
//! gradients are verified against central finite differences layer
//! family by layer family in the tests.

mod config;
mod generate;
mod net;
mod params;
pub mod probe;
mod train;

pub use config::{ModelConfig, ModelError};
pub use generate::{GenerateOptions, Generated};
pub use params::{Params, Tensor};
pub use train::{train, TaskWeight, TrainError, TrainProgress, TrainSchedule};

use alloc::string::String;

use crate::audio::{Audio, AudioError, MelExtractor};
use crate::prompt::{build_instruction, PromptError, TaskSpec};
use crate::vocab::{Vocab, VocabError, SPEECH_ID};

/// Anything that can go wrong between a task description and generated
/// text.
#[derive(Debug, Clone, PartialEq)]
pub enum RunError {
    Prompt(PromptError),
    Vocab(VocabError),
    Audio(AudioError),
    Model(ModelError),
}

impl core::fmt::Display for RunError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            RunError::Prompt(e) => write!(f, "prompt error: {e}"),
            RunError::Vocab(e) => write!(f, "vocabulary error: {e}"),
            RunError::Audio(e) => write!(f, "audio error: {e}"),
            RunError::Model(e) => write!(f, "model error: {e}"),
        }
    }
}

impl core::error::Error for RunError {}

impl From<PromptError> for RunError {
    fn from(e: PromptError) -> Self {
        RunError::Prompt(e)
    }
}
impl From<VocabError> for RunError {
    fn from(e: VocabError) -> Self {
        RunError::Vocab(e)
    }
}
impl From<AudioError> for RunError {
    fn from(e: AudioError) -> Self {
        RunError::Audio(e)
    }
}
impl From<ModelError> for RunError {
    fn from(e: ModelError) -> Self {
        RunError::Model(e)
    }
}

/// Raw decoded text plus the truncation flag. The text keeps every
/// structural token (separators, timestamps, the end marker) for the
/// chain parser to digest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub text: String,
    pub truncated: bool,
}

/// A config + parameters + vocabulary triple that is ready to answer
/// task prompts. Construction validates that the three agree.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    config: ModelConfig,
    params: Params,
    vocab: Vocab,
    extractor: MelExtractor,
}

impl TrainedModel {
    pub fn new(config: ModelConfig, params: Params, vocab: Vocab) -> Result<TrainedModel, ModelError> {
        config.validate()?;
        if vocab.size() != config.vocab {
            return Err(ModelError::BadConfig("vocabulary size differs from config.vocab"));
        }
        let expected = Params::expected_shapes(&config);
        let mut seen = 0usize;
        for (name, t) in params.iter() {
            match expected.get(name) {
                None => {
                    return Err(ModelError::UnexpectedTensor { name: String::from(name) })
                }
                Some(shape) if t.shape() != shape.as_slice() => {
                    return Err(ModelError::ShapeMismatch { name: String::from(name) })
                }
                Some(_) => seen += 1,
            }
        }
        if seen != expected.len() {
            let missing = expected
                .keys()
                .find(|k| params.get(k).is_none())
                .expect("count mismatch implies a missing name");
            return Err(ModelError::MissingTensor { name: missing.clone() });
        }
        Ok(TrainedModel { config, params, vocab, extractor: MelExtractor::new() })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    /// Builds the instruction for `task`, conditions on `audio` when
    /// the instruction carries the speech marker, and decodes greedily.
    pub fn respond(
        &self,
        audio: Option<&Audio>,
        task: &TaskSpec,
        opts: &GenerateOptions,
    ) -> Result<Response, RunError> {
        let instruction = build_instruction(task)?;
        let ids = self.vocab.encode(&instruction)?;
        let mel = if ids.contains(&SPEECH_ID) {
            let audio = audio.ok_or(RunError::Model(ModelError::MissingAudio))?;
            Some(self.extractor.extract(audio)?)
        } else {
            None
        };
        let out = generate::generate(&self.params, &self.config, mel.as_ref(), &ids, opts)?;
        Ok(Response { text: self.vocab.decode(&out.ids), truncated: out.truncated })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::TaskKind;
    use crate::synth::{gen_corpus, CorpusSpec, Lexicon};
    use crate::vocab::Vocab;

    fn tiny_setup() -> TrainedModel {
        let spec = CorpusSpec::new(3, 2, 6).unwrap();
        let lex = Lexicon::from_spec(&spec).unwrap();
        let vocab = Vocab::build(&lex, crate::prompt::SOURCE_LANG, crate::prompt::TARGET_LANG);
        let mut cfg = ModelConfig::small(vocab.size(), 1);
        cfg.width = 16;
        cfg.heads = 2;
        cfg.ffn = 32;
        cfg.enc_layers = 1;
        cfg.dec_layers = 1;
        cfg.max_audio_frames = 600;
        cfg.max_seq_len = 256;
        let params = Params::init(&cfg);
        TrainedModel::new(cfg, params, vocab).unwrap()
    }

    #[test]
    fn construction_checks_vocab_and_layout() {
        let model = tiny_setup();
        let cfg = model.config().clone();
        let params = model.params().clone();
        let vocab = model.vocab().clone();

        let mut wrong = cfg.clone();
        wrong.vocab += 1;
        assert!(matches!(
            TrainedModel::new(wrong, params.clone(), vocab.clone()),
            Err(ModelError::BadConfig(_))
        ));

        let mut deeper = cfg;
        deeper.dec_layers += 1; // params lack the extra layer
        assert!(matches!(
            TrainedModel::new(deeper, params, vocab),
            Err(ModelError::MissingTensor { .. })
        ));
    }

    #[test]
    fn respond_runs_audio_and_text_tasks() {
        let model = tiny_setup();
        let spec = CorpusSpec::new(3, 2, 6).unwrap();
        let corpus = gen_corpus(&spec).unwrap();
        let ex = &corpus[0];
        let opts = GenerateOptions { max_new_tokens: 6 };

        let asr = crate::prompt::task_for_example(TaskKind::Asr, ex, false);
        let r1 = model.respond(Some(&ex.audio), &asr, &opts).unwrap();
        let r2 = model.respond(Some(&ex.audio), &asr, &opts).unwrap();
        assert_eq!(r1, r2); // deterministic
        assert!(!r1.text.is_empty());

        // audio task without audio → hard error
        assert!(matches!(
            model.respond(None, &asr, &opts),
            Err(RunError::Model(ModelError::MissingAudio))
        ));

        // text-only task ignores audio entirely
        let mt = crate::prompt::task_for_example(TaskKind::Mt, ex, false);
        let with = model.respond(Some(&ex.audio), &mt, &opts).unwrap();
        let without = model.respond(None, &mt, &opts).unwrap();
        assert_eq!(with, without);
    }
}
