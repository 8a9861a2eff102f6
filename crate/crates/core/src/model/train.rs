//! Multi-task instruction training.
//!
//! Each optimizer step samples `batch_size` (example, task) pairs: the
//! example uniformly, the task from the configured weight table, and a
//! coin decides whether the prompt carries the preceding-sentence
//! context line. Gradients are averaged over the batch and applied with
//! Adam under a linear-warmup + cosine-decay learning-rate schedule.
//!
//! A non-finite batch loss aborts training immediately; the error hands
//! back the parameters from the last step whose loss was still finite,
//! so callers keep a usable checkpoint even on divergence.

use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ModelConfig, ModelError};
use super::net::{self, Batch};
use super::params::Params;
use super::TrainedModel;
use crate::audio::{AudioError, MelExtractor};
use crate::math;
use crate::prompt::{
    build_instruction, build_target, task_for_example, PromptError, TaskKind, ALL_KINDS,
    SOURCE_LANG, TARGET_LANG,
};
use crate::synth::{Lexicon, SynthExample};
use crate::vocab::{Vocab, VocabError};

/// Sampling weight of one task in the training mixture. A weight of
/// zero removes the task entirely — it is never sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskWeight {
    pub kind: TaskKind,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSchedule {
    /// Optimizer steps.
    pub steps: usize,
    /// Examples sampled (and gradients averaged) per step.
    pub batch_size: usize,
    /// Peak learning rate, reached at the end of warmup.
    pub peak_lr: f64,
    /// Steps of linear warmup before the cosine decay begins.
    pub warmup_steps: usize,
    /// The task mixture.
    pub weights: Vec<TaskWeight>,
    /// Probability that a sampled pair includes its context line.
    pub context_fraction: f64,
    /// Seed for all sampling in this run.
    pub seed: u64,
}

impl TrainSchedule {
    /// Uniform mixture over all tasks, 50% context, sane defaults.
    pub fn new(steps: usize) -> TrainSchedule {
        TrainSchedule {
            steps,
            batch_size: 4,
            peak_lr: 3e-3,
            warmup_steps: (steps / 10).max(1),
            weights: ALL_KINDS.iter().map(|k| TaskWeight { kind: *k, weight: 1.0 }).collect(),
            context_fraction: 0.5,
            seed: 0,
        }
    }
}

/// Progress report passed to the step callback.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainProgress {
    pub step: usize,
    pub steps: usize,
    /// Mean batch loss at this step (before the update).
    pub loss: f64,
    pub lr: f64,
}

#[derive(Debug)]
pub enum TrainError {
    NoExamples,
    /// Every task weight is zero (or the table is empty).
    NoTasks,
    /// A weight is negative or not finite.
    BadWeight { kind: TaskKind },
    /// A task has positive weight but no example in the corpus can
    /// serve it (e.g. gloss tasks on a corpus without terminology).
    TaskUnsupported { kind: TaskKind },
    BadSchedule(&'static str),
    /// The batch loss became non-finite. `last_good` holds the model
    /// from the most recent step that still had a finite loss.
    Diverged { step: usize, last_good: Box<TrainedModel> },
    Model(ModelError),
    Prompt(PromptError),
    Vocab(VocabError),
    Audio(AudioError),
}

impl core::fmt::Display for TrainError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            TrainError::NoExamples => write!(f, "no training examples"),
            TrainError::NoTasks => write!(f, "the task mixture has no positive weights"),
            TrainError::BadWeight { kind } => {
                write!(f, "task {} has a negative or non-finite weight", kind.name())
            }
            TrainError::TaskUnsupported { kind } => {
                write!(f, "task {} has positive weight but no example supports it", kind.name())
            }
            TrainError::BadSchedule(what) => write!(f, "bad schedule: {what}"),
            TrainError::Diverged { step, .. } => {
                write!(f, "loss became non-finite at step {step}; last good checkpoint attached")
            }
            TrainError::Model(e) => write!(f, "model error: {e}"),
            TrainError::Prompt(e) => write!(f, "prompt error: {e}"),
            TrainError::Vocab(e) => write!(f, "vocabulary error: {e}"),
            TrainError::Audio(e) => write!(f, "audio error: {e}"),
        }
    }
}

impl core::error::Error for TrainError {}

/// Cumulative-weight sampling table over the positive-weight tasks.
pub(crate) struct TaskTable {
    kinds: Vec<TaskKind>,
    cum: Vec<f64>,
    total: f64,
}

impl TaskTable {
    pub(crate) fn build(weights: &[TaskWeight]) -> Result<TaskTable, TrainError> {
        let mut kinds = Vec::new();
        let mut cum = Vec::new();
        let mut total = 0.0;
        for tw in weights {
            if !tw.weight.is_finite() || tw.weight < 0.0 {
                return Err(TrainError::BadWeight { kind: tw.kind });
            }
            if tw.weight == 0.0 {
                continue;
            }
            total += tw.weight;
            kinds.push(tw.kind);
            cum.push(total);
        }
        if kinds.is_empty() {
            return Err(TrainError::NoTasks);
        }
        Ok(TaskTable { kinds, cum, total })
    }

    pub(crate) fn kinds(&self) -> &[TaskKind] {
        &self.kinds
    }

    pub(crate) fn pick(&self, rng: &mut ChaCha8Rng) -> TaskKind {
        let r = rng.random_range(0.0..self.total);
        for (i, c) in self.cum.iter().enumerate() {
            if r < *c {
                return self.kinds[i];
            }
        }
        *self.kinds.last().expect("table is non-empty")
    }
}

/// Linear warmup to `peak_lr`, then cosine decay towards zero.
pub(crate) fn lr_at(step: usize, schedule: &TrainSchedule) -> f64 {
    let warm = schedule.warmup_steps.min(schedule.steps);
    if step < warm {
        return schedule.peak_lr * (step + 1) as f64 / warm as f64;
    }
    if schedule.steps <= warm {
        return schedule.peak_lr;
    }
    let progress = (step - warm) as f64 / (schedule.steps - warm) as f64;
    schedule.peak_lr * 0.5 * (1.0 + math::cos(core::f64::consts::PI * progress))
}

/// Adam with bias correction; moments mirror the parameter layout.
pub(super) struct Adam {
    m: Params,
    v: Params,
    t: u32,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub(super) fn new(params: &Params) -> Adam {
        Adam {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub(super) fn step(&mut self, params: &mut Params, grads: &Params, lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - math::pow(self.beta1, self.t as f64);
        let bc2 = 1.0 - math::pow(self.beta2, self.t as f64);
        for (((_, p), (_, g)), ((_, m), (_, v))) in params
            .iter_mut()
            .zip(grads.iter())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let p = p.data_mut();
            let g = g.data();
            let m = m.data_mut();
            let v = v.data_mut();
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p[i] -= lr * mhat / (math::sqrt(vhat) + self.eps);
            }
        }
    }
}

fn zero(params: &mut Params) {
    for (_, t) in params.iter_mut() {
        t.data_mut().fill(0.0);
    }
}

fn copy_into(dst: &mut Params, src: &Params) {
    for ((_, d), (_, s)) in dst.iter_mut().zip(src.iter()) {
        d.data_mut().copy_from_slice(s.data());
    }
}

/// Trains a fresh model on the corpus. The vocabulary is built from the
/// lexicon and overrides `config.vocab`; everything else in `config` is
/// taken as given. `on_step` fires once per optimizer step.
pub fn train(
    examples: &[SynthExample],
    lex: &Lexicon,
    mut config: ModelConfig,
    schedule: &TrainSchedule,
    mut on_step: impl FnMut(&TrainProgress),
) -> Result<TrainedModel, TrainError> {
    if examples.is_empty() {
        return Err(TrainError::NoExamples);
    }
    if schedule.steps == 0 {
        return Err(TrainError::BadSchedule("steps must be positive"));
    }
    if schedule.batch_size == 0 {
        return Err(TrainError::BadSchedule("batch_size must be positive"));
    }
    if !schedule.peak_lr.is_finite() || schedule.peak_lr <= 0.0 {
        return Err(TrainError::BadSchedule("peak_lr must be positive and finite"));
    }
    if !(0.0..=1.0).contains(&schedule.context_fraction) {
        return Err(TrainError::BadSchedule("context_fraction must lie in [0, 1]"));
    }
    let table = TaskTable::build(&schedule.weights)?;

    // Gloss tasks only make sense on utterances that contain
    // terminology; they sample from this restricted pool.
    let explainable: Vec<usize> = (0..examples.len())
        .filter(|i| examples[*i].explanation.is_some())
        .collect();
    if explainable.is_empty() {
        if let Some(kind) = table.kinds().iter().copied().find(|k| k.needs_explanation()) {
            return Err(TrainError::TaskUnsupported { kind });
        }
    }

    let vocab = Vocab::build(lex, SOURCE_LANG, TARGET_LANG);
    config.vocab = vocab.size();
    config.validate().map_err(TrainError::Model)?;

    // Features are parameter-independent: extract once up front.
    let extractor = MelExtractor::new();
    let mut mels = Vec::with_capacity(examples.len());
    for ex in examples {
        let mel = extractor.extract(&ex.audio).map_err(TrainError::Audio)?;
        if mel.frames() > config.max_audio_frames {
            return Err(TrainError::Model(ModelError::AudioTooLong {
                frames: mel.frames(),
                max: config.max_audio_frames,
            }));
        }
        mels.push(mel);
    }

    let mut params = Params::init(&config);
    let mut prev = params.clone();
    let mut grads = params.zeros_like();
    let mut opt = Adam::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);

    for step in 0..schedule.steps {
        zero(&mut grads);
        let mut loss_sum = 0.0;
        for _ in 0..schedule.batch_size {
            let kind = table.pick(&mut rng);
            let ex_i = if kind.needs_explanation() {
                explainable[rng.random_range(0..explainable.len())]
            } else {
                rng.random_range(0..examples.len())
            };
            let ex = &examples[ex_i];
            let with_ctx = !ex.context.is_empty()
                && rng.random_range(0.0..1.0) < schedule.context_fraction;
            let task = task_for_example(kind, ex, with_ctx);
            let instruction = build_instruction(&task).map_err(TrainError::Prompt)?;
            let target_text = build_target(&task, ex).map_err(TrainError::Prompt)?;
            let prompt_ids = vocab.encode(&instruction).map_err(TrainError::Vocab)?;
            let target_ids = vocab.encode(&target_text).map_err(TrainError::Vocab)?;
            let batch = Batch {
                mel: kind.needs_audio().then(|| &mels[ex_i]),
                prompt: &prompt_ids,
                target: &target_ids,
            };
            loss_sum +=
                net::loss_and_grads(&params, &config, &batch, &mut grads).map_err(TrainError::Model)?;
        }
        let loss = loss_sum / schedule.batch_size as f64;
        if !loss.is_finite() {
            let last_good = TrainedModel::new(config, prev, vocab)
                .expect("divergence snapshot has a valid layout");
            return Err(TrainError::Diverged { step, last_good: Box::new(last_good) });
        }
        copy_into(&mut prev, &params);

        let inv = 1.0 / schedule.batch_size as f64;
        for (_, g) in grads.iter_mut() {
            for v in g.data_mut() {
                *v *= inv;
            }
        }
        let lr = lr_at(step, schedule);
        opt.step(&mut params, &grads, lr);
        on_step(&TrainProgress { step, steps: schedule.steps, loss, lr });
    }

    TrainedModel::new(config, params, vocab).map_err(TrainError::Model)
}
