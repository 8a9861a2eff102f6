//! Named parameter tensors.
//!
//! Parameters live in a name→tensor map rather than a rigid struct so
//! that optimizers, serialization, and gradient checks can treat the
//! whole model as a flat list while still addressing individual pieces
//! by a stable, human-readable name (`dec.2.attn.q.w`, `enc.conv1.b`,
//! …). Map iteration order is the sorted name order, which keeps every
//! whole-model traversal deterministic.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ModelConfig, ModelError};
use crate::math;

/// A dense row-major `f64` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Tensor {
        let len = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![0.0; len] }
    }

    /// Wraps an existing buffer; the length must match the shape.
    pub fn from_data(shape: Vec<usize>, data: Vec<f64>) -> Option<Tensor> {
        if shape.iter().product::<usize>() == data.len() {
            Some(Tensor { shape, data })
        } else {
            None
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// The full parameter set of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    tensors: BTreeMap<String, Tensor>,
}

/// Appends the shapes of one pre-norm transformer block under `prefix`.
fn block_shapes(shapes: &mut BTreeMap<String, Vec<usize>>, prefix: &str, cfg: &ModelConfig) {
    let w = cfg.width;
    let f = cfg.ffn;
    shapes.insert(format!("{prefix}.ln1.g"), vec![w]);
    shapes.insert(format!("{prefix}.ln1.b"), vec![w]);
    for name in ["q", "k", "v", "o"] {
        shapes.insert(format!("{prefix}.attn.{name}.w"), vec![w, w]);
        shapes.insert(format!("{prefix}.attn.{name}.b"), vec![w]);
    }
    shapes.insert(format!("{prefix}.ln2.g"), vec![w]);
    shapes.insert(format!("{prefix}.ln2.b"), vec![w]);
    shapes.insert(format!("{prefix}.ffn.w1"), vec![f, w]);
    shapes.insert(format!("{prefix}.ffn.b1"), vec![f]);
    shapes.insert(format!("{prefix}.ffn.w2"), vec![w, f]);
    shapes.insert(format!("{prefix}.ffn.b2"), vec![w]);
}

impl Params {
    /// The complete name→shape layout implied by a config.
    pub fn expected_shapes(cfg: &ModelConfig) -> BTreeMap<String, Vec<usize>> {
        let w = cfg.width;
        let mel = cfg.mel_dim();
        let mut shapes = BTreeMap::new();

        shapes.insert("enc.conv1.w".to_string(), vec![w, mel, cfg.kernel]);
        shapes.insert("enc.conv1.b".to_string(), vec![w]);
        shapes.insert("enc.conv2.w".to_string(), vec![w, w, cfg.kernel]);
        shapes.insert("enc.conv2.b".to_string(), vec![w]);
        for l in 0..cfg.enc_layers {
            block_shapes(&mut shapes, &format!("enc.{l}"), cfg);
        }
        shapes.insert("enc.ln_out.g".to_string(), vec![w]);
        shapes.insert("enc.ln_out.b".to_string(), vec![w]);
        shapes.insert("proj.w".to_string(), vec![w, w]);
        shapes.insert("proj.b".to_string(), vec![w]);

        shapes.insert("dec.tok_embed".to_string(), vec![cfg.vocab, w]);
        shapes.insert("dec.pos_embed".to_string(), vec![cfg.max_seq_len, w]);
        for l in 0..cfg.dec_layers {
            block_shapes(&mut shapes, &format!("dec.{l}"), cfg);
        }
        shapes.insert("dec.ln_out.g".to_string(), vec![w]);
        shapes.insert("dec.ln_out.b".to_string(), vec![w]);
        shapes.insert("dec.unembed.w".to_string(), vec![cfg.vocab, w]);
        shapes.insert("dec.unembed.b".to_string(), vec![cfg.vocab]);
        shapes
    }

    /// Fresh parameters, deterministic in `cfg.seed`.
    ///
    /// Weight matrices draw from uniform(−a, a) with a = sqrt(3/fan_in)
    /// (unit-preserving); embeddings and the unembedding use a small
    /// fixed scale so initial logits sit near zero and the initial loss
    /// is close to ln(vocab). Norm gains start at 1, all biases at 0.
    pub fn init(cfg: &ModelConfig) -> Params {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut tensors = BTreeMap::new();
        for (name, shape) in Params::expected_shapes(cfg) {
            let mut t = Tensor::zeros(&shape);
            if name.ends_with(".g") {
                t.data_mut().fill(1.0);
            } else if shape.len() == 1 {
                // biases and norm offsets stay zero
            } else if name.contains("embed") {
                // std 0.02, the usual small-embedding scale
                let a = 0.02 * math::sqrt(3.0);
                for v in t.data_mut() {
                    *v = rng.random_range(-a..a);
                }
            } else if name.ends_with(".w") || name.ends_with(".w1") || name.ends_with(".w2") {
                let fan_in: usize = shape[1..].iter().product();
                let a = math::sqrt(3.0 / fan_in as f64);
                for v in t.data_mut() {
                    *v = rng.random_range(-a..a);
                }
            }
            tensors.insert(name, t);
        }
        Params { tensors }
    }

    /// Same names and shapes, all zeros — the shape of a gradient or an
    /// optimizer moment.
    pub fn zeros_like(&self) -> Params {
        let tensors = self
            .tensors
            .iter()
            .map(|(name, t)| (name.clone(), Tensor::zeros(t.shape())))
            .collect();
        Params { tensors }
    }

    /// Validates a loose tensor collection against the layout of `cfg`
    /// (exact name set, exact shapes) and wraps it.
    pub fn from_tensors(
        cfg: &ModelConfig,
        tensors: BTreeMap<String, Tensor>,
    ) -> Result<Params, ModelError> {
        let expected = Params::expected_shapes(cfg);
        for name in tensors.keys() {
            if !expected.contains_key(name) {
                return Err(ModelError::UnexpectedTensor { name: name.clone() });
            }
        }
        for (name, shape) in &expected {
            match tensors.get(name) {
                None => return Err(ModelError::MissingTensor { name: name.clone() }),
                Some(t) if t.shape() != shape.as_slice() => {
                    return Err(ModelError::ShapeMismatch { name: name.clone() })
                }
                Some(_) => {}
            }
        }
        Ok(Params { tensors })
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.tensors.iter_mut().map(|(n, t)| (n.as_str(), t))
    }

    /// Total scalar count.
    pub fn num_scalars(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    /// Internal lookup; the name set is fixed by construction, so a
    /// miss is a programming error.
    pub(crate) fn t(&self, name: &str) -> &Tensor {
        self.tensors.get(name).unwrap_or_else(|| panic!("unknown tensor {name}"))
    }

    pub(crate) fn slice(&self, name: &str) -> &[f64] {
        self.t(name).data()
    }

    pub(crate) fn slice_mut(&mut self, name: &str) -> &mut [f64] {
        self.tensors
            .get_mut(name)
            .unwrap_or_else(|| panic!("unknown tensor {name}"))
            .data_mut()
    }
}
