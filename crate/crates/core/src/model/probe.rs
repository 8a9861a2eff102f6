//! Direct loss and gradient access on a frozen batch.
//!
//! [`train`](super::train) owns the full optimization loop; this module
//! exposes the objective underneath it for callers who want to inspect
//! it from outside the crate — verifying the hand-written backward
//! passes against finite differences, plotting loss landscapes, or
//! driving a custom optimizer.

use alloc::vec::Vec;

use super::config::{ModelConfig, ModelError};
use super::net::{self, Batch};
use super::params::Params;
use super::train::TrainError;
use crate::audio::{Features, MelExtractor};
use crate::prompt::{
    build_instruction, build_target, task_for_example, TaskKind, SOURCE_LANG, TARGET_LANG,
};
use crate::synth::{Lexicon, SynthExample};
use crate::vocab::Vocab;

struct Item {
    mel: Option<Features>,
    prompt: Vec<u32>,
    target: Vec<u32>,
}

/// A fixed set of (prompt, target, features) triples with the model
/// configuration needed to evaluate them. The batch never changes after
/// construction, so repeated [`loss`](LossProbe::loss) calls at nudged
/// parameters measure exactly the function whose gradient
/// [`loss_and_grads`](LossProbe::loss_and_grads) reports.
pub struct LossProbe {
    config: ModelConfig,
    vocab: Vocab,
    items: Vec<Item>,
}

impl LossProbe {
    /// Builds the batch by pairing example `i` with `kinds[i % kinds.len()]`,
    /// context attached where the example has one. As in training, the
    /// vocabulary is built from the lexicon and overrides `config.vocab`.
    pub fn new(
        examples: &[SynthExample],
        lex: &Lexicon,
        kinds: &[TaskKind],
        mut config: ModelConfig,
    ) -> Result<LossProbe, TrainError> {
        if examples.is_empty() {
            return Err(TrainError::NoExamples);
        }
        if kinds.is_empty() {
            return Err(TrainError::NoTasks);
        }
        let vocab = Vocab::build(lex, SOURCE_LANG, TARGET_LANG);
        config.vocab = vocab.size();
        config.validate().map_err(TrainError::Model)?;

        let extractor = MelExtractor::new();
        let mut items = Vec::with_capacity(examples.len());
        for (i, ex) in examples.iter().enumerate() {
            let kind = kinds[i % kinds.len()];
            if kind.needs_explanation() && ex.explanation.is_none() {
                return Err(TrainError::TaskUnsupported { kind });
            }
            let task = task_for_example(kind, ex, !ex.context.is_empty());
            let instruction = build_instruction(&task).map_err(TrainError::Prompt)?;
            let target_text = build_target(&task, ex).map_err(TrainError::Prompt)?;
            let mel = if kind.needs_audio() {
                let mel = extractor.extract(&ex.audio).map_err(TrainError::Audio)?;
                if mel.frames() > config.max_audio_frames {
                    return Err(TrainError::Model(ModelError::AudioTooLong {
                        frames: mel.frames(),
                        max: config.max_audio_frames,
                    }));
                }
                Some(mel)
            } else {
                None
            };
            items.push(Item {
                mel,
                prompt: vocab.encode(&instruction).map_err(TrainError::Vocab)?,
                target: vocab.encode(&target_text).map_err(TrainError::Vocab)?,
            });
        }
        Ok(LossProbe { config, vocab, items })
    }

    /// The configuration after the vocabulary override; pass it to
    /// [`Params::init`] for a compatible parameter set.
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    /// Mean cross-entropy of the batch at `params`.
    pub fn loss(&self, params: &Params) -> Result<f64, ModelError> {
        let mut sum = 0.0;
        for item in &self.items {
            sum += net::loss(params, &self.config, &self.batch(item))?;
        }
        Ok(sum / self.items.len() as f64)
    }

    /// Mean loss and its gradient. `grads` must come from
    /// [`Params::zeros_like`] on a compatible parameter set; it is
    /// overwritten, not accumulated into.
    pub fn loss_and_grads(
        &self,
        params: &Params,
        grads: &mut Params,
    ) -> Result<f64, ModelError> {
        for (_, g) in grads.iter_mut() {
            g.data_mut().fill(0.0);
        }
        let mut sum = 0.0;
        for item in &self.items {
            sum += net::loss_and_grads(params, &self.config, &self.batch(item), grads)?;
        }
        let inv = 1.0 / self.items.len() as f64;
        for (_, g) in grads.iter_mut() {
            for v in g.data_mut() {
                *v *= inv;
            }
        }
        Ok(sum * inv)
    }

    fn batch<'a>(&'a self, item: &'a Item) -> Batch<'a> {
        Batch { mel: item.mel.as_ref(), prompt: &item.prompt, target: &item.target }
    }
}
