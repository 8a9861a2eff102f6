//! Token vocabulary: reserved specials, the 1501 timestamp tokens, and
//! the closed set of word tokens a corpus can produce.
//!
//! Layout is fixed: `<PAD>`=0, `<EOS>`=1, `<SEP>`=2, `[SpeechRepr]`=3,
//! timestamp tokens at ids 4..=1504 in grid order, then word tokens in
//! sorted order. The word set is the union of the corpus surface forms
//! and every token the instruction templates can render, so any prompt
//! or target built for the corpus encodes without unknowns.
//!
//! Tokenization is whitespace splitting; decoding joins with single
//! spaces. Both are exact inverses on the strings this system builds,
//! which all come from whitespace-joined vocabularies.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::prompt::{self, EOS, SEP, SPEECH_MARKER};
use crate::synth::Lexicon;
use crate::timestamp::{TimePoint, NUM_TIME_TOKENS};

/// Padding token id (never produced by builders; reserved for batching).
pub const PAD_ID: u32 = 0;
pub const EOS_ID: u32 = 1;
pub const SEP_ID: u32 = 2;
pub const SPEECH_ID: u32 = 3;
/// First timestamp token id; grid index `i` lives at `TIME_BASE + i`.
pub const TIME_BASE: u32 = 4;

const PAD: &str = "<PAD>";

#[derive(Debug, Clone, PartialEq)]
pub enum VocabError {
    UnknownToken { token: String },
    /// Token list violates the fixed layout (wrong specials, bad time
    /// token block, or duplicate word entries).
    MalformedLayout { reason: String },
}

impl core::fmt::Display for VocabError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            VocabError::UnknownToken { token } => write!(f, "unknown token {token:?}"),
            VocabError::MalformedLayout { reason } => {
                write!(f, "malformed vocabulary: {reason}")
            }
        }
    }
}

impl core::error::Error for VocabError {}

/// Immutable token table with two-way lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    tokens: Vec<String>,
    ids: BTreeMap<String, u32>,
}

impl Vocab {
    /// Build the vocabulary for a corpus lexicon and language pair.
    pub fn build(lex: &Lexicon, source_lang: &str, target_lang: &str) -> Self {
        let mut words = lex.surface_forms();
        words.extend(prompt::instruction_tokens(source_lang, target_lang));
        let mut tokens = Vec::with_capacity(4 + NUM_TIME_TOKENS + words.len());
        tokens.push(PAD.to_string());
        tokens.push(EOS.to_string());
        tokens.push(SEP.to_string());
        tokens.push(SPEECH_MARKER.to_string());
        for i in 0..NUM_TIME_TOKENS {
            tokens.push(TimePoint::from_index(i as u16).expect("grid index").token());
        }
        // BTreeSet iteration gives sorted, deduplicated word tokens.
        // The marker is already reserved; everything else is plain text.
        tokens.extend(words.into_iter().filter(|w| w != SPEECH_MARKER));
        Self::from_tokens(tokens).expect("built layout is valid")
    }

    /// Reconstruct a vocabulary from its token list (checkpoint load).
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, VocabError> {
        let expect = |id: usize, want: &str| -> Result<(), VocabError> {
            if tokens.get(id).map(String::as_str) != Some(want) {
                return Err(VocabError::MalformedLayout {
                    reason: alloc::format!("id {id} must be {want:?}"),
                });
            }
            Ok(())
        };
        expect(PAD_ID as usize, PAD)?;
        expect(EOS_ID as usize, EOS)?;
        expect(SEP_ID as usize, SEP)?;
        expect(SPEECH_ID as usize, SPEECH_MARKER)?;
        for i in 0..NUM_TIME_TOKENS {
            let want = TimePoint::from_index(i as u16).expect("grid index").token();
            expect(TIME_BASE as usize + i, &want)?;
        }
        let mut ids = BTreeMap::new();
        for (id, tok) in tokens.iter().enumerate() {
            if ids.insert(tok.clone(), id as u32).is_some() {
                return Err(VocabError::MalformedLayout {
                    reason: alloc::format!("duplicate token {tok:?}"),
                });
            }
        }
        Ok(Self { tokens, ids })
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    /// The id → surface table, e.g. for checkpoint serialization.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Id of a timestamp grid point.
    pub fn time_id(&self, time: TimePoint) -> u32 {
        TIME_BASE + u32::from(time.index())
    }

    /// The grid point behind a timestamp token id, if it is one.
    pub fn as_time(&self, id: u32) -> Option<TimePoint> {
        let i = id.checked_sub(TIME_BASE)?;
        if (i as usize) < NUM_TIME_TOKENS {
            Some(TimePoint::from_index(i as u16).expect("in range"))
        } else {
            None
        }
    }

    /// Whitespace-tokenize and map to ids; any chunk outside the
    /// vocabulary is an error.
    pub fn encode(&self, text: &str) -> Result<Vec<u32>, VocabError> {
        text.split_whitespace()
            .map(|t| {
                self.id(t).ok_or_else(|| VocabError::UnknownToken { token: t.to_string() })
            })
            .collect()
    }

    /// Inverse of [`Vocab::encode`]: surfaces joined by single spaces.
    /// Ids outside the table render as `<?>`; this is decode-side only
    /// and cannot round-trip back (encode rejects it).
    pub fn decode(&self, ids: &[u32]) -> String {
        let parts: Vec<&str> = ids.iter().map(|id| self.token(*id).unwrap_or("<?>")).collect();
        parts.join(" ")
    }
}
