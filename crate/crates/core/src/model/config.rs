//! Model hyperparameters.

use alloc::string::String;

use crate::audio::NUM_MELS;
use crate::nn;

/// Everything needed to rebuild the network shape. Width/depth default
/// to a desk-scale model that trains in minutes on a CPU.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelConfig {
    /// Token inventory size; must match the vocabulary the model is
    /// trained and decoded with.
    pub vocab: usize,
    /// Residual width of both encoder and decoder.
    pub width: usize,
    /// Attention heads (must divide `width`).
    pub heads: usize,
    /// Hidden width of the position-wise feed-forward blocks.
    pub ffn: usize,
    /// Transformer layers in the audio encoder.
    pub enc_layers: usize,
    /// Transformer layers in the decoder LM.
    pub dec_layers: usize,
    /// Strides of the two downsampling convolutions in front of the
    /// encoder.
    pub conv_strides: (usize, usize),
    /// Kernel size of both convolutions (odd, so padding keeps edges).
    pub kernel: usize,
    /// Longest mel sequence the encoder accepts (3000 frames = 30 s).
    pub max_audio_frames: usize,
    /// Longest decoder sequence (audio prefix + prompt + output).
    pub max_seq_len: usize,
    /// Seed for parameter initialization.
    pub seed: u64,
}

/// Why a config or a forward pass was rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelError {
    /// `width` is not divisible by `heads`, or a structural field is
    /// zero/odd where it must not be.
    BadConfig(&'static str),
    /// Audio longer than `max_audio_frames` mel frames.
    AudioTooLong { frames: usize, max: usize },
    /// Assembled decoder sequence exceeds `max_seq_len`.
    SequenceTooLong { len: usize, max: usize },
    /// A token id out of `0..vocab`.
    TokenOutOfRange { id: u32, vocab: usize },
    /// The prompt contains the speech marker but no audio was given.
    MissingAudio,
    /// The prompt or target is empty where content is required.
    EmptySequence,
    /// A named tensor was missing when assembling parameters.
    MissingTensor { name: String },
    /// A tensor not part of the layout was supplied.
    UnexpectedTensor { name: String },
    /// A supplied tensor had the wrong shape.
    ShapeMismatch { name: String },
}

impl core::fmt::Display for ModelError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ModelError::BadConfig(what) => write!(f, "bad model config: {what}"),
            ModelError::AudioTooLong { frames, max } => {
                write!(f, "audio of {frames} mel frames exceeds the {max}-frame limit")
            }
            ModelError::SequenceTooLong { len, max } => {
                write!(f, "decoder sequence of {len} tokens exceeds the {max}-token limit")
            }
            ModelError::TokenOutOfRange { id, vocab } => {
                write!(f, "token id {id} out of range for vocabulary of {vocab}")
            }
            ModelError::MissingAudio => {
                write!(f, "prompt requests speech input but no audio was provided")
            }
            ModelError::EmptySequence => write!(f, "prompt and target must be non-empty"),
            ModelError::MissingTensor { name } => write!(f, "missing tensor {name}"),
            ModelError::UnexpectedTensor { name } => write!(f, "unexpected tensor {name}"),
            ModelError::ShapeMismatch { name } => write!(f, "tensor {name} has the wrong shape"),
        }
    }
}

impl core::error::Error for ModelError {}

impl ModelConfig {
    /// The default desk-scale shape for a given vocabulary.
    pub fn small(vocab: usize, seed: u64) -> ModelConfig {
        ModelConfig {
            vocab,
            width: 64,
            heads: 4,
            ffn: 128,
            enc_layers: 2,
            dec_layers: 3,
            conv_strides: (2, 2),
            kernel: 3,
            max_audio_frames: 3000,
            max_seq_len: 1024,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.vocab < 2 {
            return Err(ModelError::BadConfig("vocab must be at least 2"));
        }
        if self.width == 0 || self.heads == 0 || !self.width.is_multiple_of(self.heads) {
            return Err(ModelError::BadConfig("width must be a positive multiple of heads"));
        }
        if !self.width.is_multiple_of(2) {
            return Err(ModelError::BadConfig("width must be even for sinusoidal positions"));
        }
        if self.ffn == 0 || self.enc_layers == 0 || self.dec_layers == 0 {
            return Err(ModelError::BadConfig("ffn and layer counts must be positive"));
        }
        if self.kernel.is_multiple_of(2) || self.kernel == 0 {
            return Err(ModelError::BadConfig("kernel must be odd"));
        }
        if self.conv_strides.0 == 0 || self.conv_strides.1 == 0 {
            return Err(ModelError::BadConfig("conv strides must be positive"));
        }
        if self.max_audio_frames == 0 || self.max_seq_len < 8 {
            return Err(ModelError::BadConfig("sequence limits are too small"));
        }
        if self.encoded_len(self.max_audio_frames) + 8 > self.max_seq_len {
            return Err(ModelError::BadConfig(
                "max_seq_len leaves no room after the longest audio prefix",
            ));
        }
        Ok(())
    }

    /// Encoder output length for `t` mel frames: each convolution maps
    /// t to ceil(t / stride).
    pub fn encoded_len(&self, t: usize) -> usize {
        let t1 = nn::conv1d_out_len(t, self.conv_strides.0);
        nn::conv1d_out_len(t1, self.conv_strides.1)
    }

    /// Mel channels consumed by the first convolution.
    pub fn mel_dim(&self) -> usize {
        NUM_MELS
    }
}
