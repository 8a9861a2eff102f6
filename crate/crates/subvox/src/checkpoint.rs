//! Versioned binary model checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "SVCKPT01" (format name + version)
//! config   u32 length, then that many bytes of config JSON
//! vocab    u32 token count, then per token: u32 length + UTF-8 bytes
//! tensors  u32 tensor count, then per tensor:
//!            u32 name length + UTF-8 name
//!            u32 rank, then one u32 per dimension
//!            8 bytes per f64 value, row-major
//! ```
//!
//! Tensor counts and shapes are re-validated against the embedded
//! config on load, so a checkpoint either reconstructs the exact model
//! (bit-for-bit parameters) or fails loudly. Writes are deterministic:
//! tensors are stored in name order.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use subvox_core::model::{ModelConfig, ModelError, Params, Tensor, TrainedModel};
use subvox_core::vocab::{Vocab, VocabError};
use thiserror::Error;

const MAGIC: &[u8; 8] = b"SVCKPT01";

/// Refuse to allocate for length fields beyond this; real checkpoints
/// are a few MB, so anything bigger is a corrupt or hostile file.
const MAX_FIELD: usize = 1 << 30;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("not a checkpoint (bad magic); expected {MAGIC:?}")]
    BadMagic,
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("embedded config is invalid JSON: {0}")]
    BadConfigJson(#[from] serde_json::Error),
    #[error("checkpoint does not form a valid model: {0}")]
    Model(#[from] ModelError),
    #[error("checkpoint vocabulary is malformed: {0}")]
    Vocab(#[from] VocabError),
}

fn io_err(path: &Path, source: std::io::Error) -> CheckpointError {
    CheckpointError::Io { path: path.display().to_string(), source }
}

fn push_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("field fits u32").to_le_bytes());
}

fn push_str(out: &mut Vec<u8>, s: &str) {
    push_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

/// Serialize a model to `path`.
pub fn save(path: &Path, model: &TrainedModel) -> Result<(), CheckpointError> {
    let config_json = serde_json::to_string(model.config())?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    push_str(&mut out, &config_json);
    push_u32(&mut out, model.vocab().tokens().len());
    for token in model.vocab().tokens() {
        push_str(&mut out, token);
    }
    push_u32(&mut out, model.params().iter().count());
    for (name, tensor) in model.params().iter() {
        push_str(&mut out, name);
        push_u32(&mut out, tensor.shape().len());
        for &d in tensor.shape() {
            push_u32(&mut out, d);
        }
        for &v in tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Byte cursor with length-checked reads; every failure names the
/// field being read.
struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], CheckpointError> {
        if self.bytes.len() - self.pos < n {
            return Err(CheckpointError::Corrupt(format!(
                "truncated while reading {what} at byte {}",
                self.pos
            )));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<usize, CheckpointError> {
        let bytes = self.take(4, what)?;
        let v = u32::from_le_bytes(bytes.try_into().expect("4 bytes")) as usize;
        if v > MAX_FIELD {
            return Err(CheckpointError::Corrupt(format!("implausible {what} length {v}")));
        }
        Ok(v)
    }

    fn string(&mut self, what: &str) -> Result<String, CheckpointError> {
        let len = self.u32(what)?;
        let bytes = self.take(len, what)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| CheckpointError::Corrupt(format!("{what} is not UTF-8")))
    }
}

/// Deserialize and fully validate a model from `path`.
pub fn load(path: &Path) -> Result<TrainedModel, CheckpointError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let mut r = Reader { bytes: &bytes, pos: 0 };
    if r.take(MAGIC.len(), "magic")? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let config: ModelConfig = serde_json::from_str(&r.string("config")?)?;

    let n_tokens = r.u32("vocab count")?;
    let mut tokens = Vec::with_capacity(n_tokens.min(1 << 20));
    for _ in 0..n_tokens {
        tokens.push(r.string("vocab token")?);
    }
    let vocab = Vocab::from_tokens(tokens)?;

    let n_tensors = r.u32("tensor count")?;
    let mut tensors = BTreeMap::new();
    for _ in 0..n_tensors {
        let name = r.string("tensor name")?;
        let rank = r.u32("tensor rank")?;
        let mut shape = Vec::with_capacity(rank.min(8));
        for _ in 0..rank {
            shape.push(r.u32("tensor dimension")?);
        }
        let len: usize = shape.iter().product();
        if len > MAX_FIELD {
            return Err(CheckpointError::Corrupt(format!("tensor {name} implausibly large")));
        }
        let raw = r.take(len * 8, "tensor data")?;
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let tensor = Tensor::from_data(shape, data).expect("length matches by construction");
        if tensors.insert(name.clone(), tensor).is_some() {
            return Err(CheckpointError::Corrupt(format!("duplicate tensor {name}")));
        }
    }
    if r.pos != bytes.len() {
        return Err(CheckpointError::Corrupt(format!(
            "{} trailing bytes after tensor data",
            bytes.len() - r.pos
        )));
    }

    let params = Params::from_tensors(&config, tensors)?;
    Ok(TrainedModel::new(config, params, vocab)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use subvox_core::model::{train, TrainSchedule};
    use subvox_core::prompt::{SOURCE_LANG, TARGET_LANG};
    use subvox_core::synth::{gen_corpus, CorpusSpec, Lexicon};

    fn tiny_model() -> TrainedModel {
        let spec = CorpusSpec::new(9, 3, 6).unwrap();
        let corpus = gen_corpus(&spec).unwrap();
        let lex = Lexicon::from_spec(&spec).unwrap();
        let vocab = Vocab::build(&lex, SOURCE_LANG, TARGET_LANG);
        let mut config = ModelConfig::small(vocab.size(), 11);
        config.width = 16;
        config.heads = 2;
        config.ffn = 32;
        config.enc_layers = 1;
        config.dec_layers = 1;
        let mut schedule = TrainSchedule::new(2);
        schedule.batch_size = 1;
        train(&corpus, &lex, config, &schedule, |_| {}).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let model = tiny_model();
        save(&path, &model).unwrap();
        let back = load(&path).unwrap();

        assert_eq!(back.config(), model.config());
        assert_eq!(back.vocab().tokens(), model.vocab().tokens());
        for ((n1, t1), (n2, t2)) in back.params().iter().zip(model.params().iter()) {
            assert_eq!(n1, n2);
            assert_eq!(t1.shape(), t2.shape());
            for (a, b) in t1.data().iter().zip(t2.data()) {
                assert_eq!(a.to_bits(), b.to_bits(), "{n1}");
            }
        }
    }

    #[test]
    fn saves_are_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let model = tiny_model();
        let (p1, p2) = (dir.path().join("a.ckpt"), dir.path().join("b.ckpt"));
        save(&p1, &model).unwrap();
        save(&p2, &model).unwrap();
        assert_eq!(fs::read(p1).unwrap(), fs::read(p2).unwrap());
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ckpt");
        fs::write(&path, b"NOTCKPT0the rest").unwrap();
        assert!(matches!(load(&path), Err(CheckpointError::BadMagic)));
    }

    #[test]
    fn truncation_rejected_everywhere() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save(&path, &tiny_model()).unwrap();
        let bytes = fs::read(&path).unwrap();
        // Cut at a spread of prefixes: header, config, vocab, tensors.
        for cut in [4, 9, 40, bytes.len() / 2, bytes.len() - 3] {
            let clipped = dir.path().join("clipped.ckpt");
            fs::write(&clipped, &bytes[..cut]).unwrap();
            assert!(load(&clipped).is_err(), "cut at {cut} bytes");
        }
    }

    #[test]
    fn trailing_garbage_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save(&path, &tiny_model()).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.extend_from_slice(b"junk");
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load(&path), Err(CheckpointError::Corrupt(_))));
    }

    #[test]
    fn flipped_shape_fails_model_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let model = tiny_model();
        save(&path, &model).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        // The first tensor name in BTreeMap order is "dec.0.attn.o.b"
        // with shape [width]; find its dimension bytes and corrupt them.
        let name = b"dec.0.attn.o.b";
        let at = bytes.windows(name.len()).position(|w| w == name).unwrap();
        let dim_at = at + name.len() + 4; // skip rank
        let width = model.config().width as u32;
        assert_eq!(&bytes[dim_at..dim_at + 4], width.to_le_bytes());
        bytes[dim_at..dim_at + 4].copy_from_slice(&(width + 1).to_le_bytes());
        fs::write(&path, &bytes).unwrap();
        // Either the shape table or the data length check must fire.
        assert!(load(&path).is_err());
    }
}
