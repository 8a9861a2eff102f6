//! Deterministic synthetic bilingual speech corpus.
//!
//! Every training task needs exact ground truth, so the corpus is built
//! from primitives whose labels are known by construction:
//!
//! * **Audio**: each source word is a pure tone with a per-word
//!   frequency and duration, separated by silence gaps. Word onsets and
//!   offsets are therefore exact, which gives perfect timestamp labels.
//! * **Translation**: a word-level cipher (the target image of a word is
//!   its reversed spelling) plus whole-sentence word-order reversal, so
//!   translation differs from transliteration and n-gram metrics are
//!   discriminative.
//! * **Context dependence**: one designated *ambiguous* word has two
//!   possible cipher images. The correct one is determined by whether a
//!   *trigger* word appears in the preceding target-language sentences,
//!   mirroring document-level disambiguation. Context-dependent
//!   utterances are generated as complementary pairs with identical
//!   main sentences and audio but opposite variants, so both images
//!   occur with equal marginal frequency and the choice is genuinely
//!   unsolvable without context — there is nothing else in the
//!   utterance to key on, not even for a model that has memorized the
//!   corpus.
//! * **ITN**: digit words ("two", "five", "nine") spell as numerals, the
//!   first word is capitalized, and a terminal period is appended.
//! * **Explanations**: words at even vocabulary indices form a
//!   "terminology" subset; sentences containing them get a gloss of the
//!   form `image means word`, joined by `and`.
//!
//! Generation is deterministic: one `(seed, utterance index)` pair fully
//! determines an example, so corpora are reproducible byte for byte and
//! may be generated in parallel.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::audio::{Audio, SAMPLE_RATE};
use crate::math;
use crate::timestamp::TimedSegment;

const CONSONANTS: &[u8] = b"kbdfglmnprstv";
const VOWELS: &[u8] = b"aeiou";

/// Digit words and their numeral spellings, applied by [`apply_itn`].
pub const DIGIT_WORDS: [(&str, &str); 3] = [("two", "2"), ("five", "5"), ("nine", "9")];

/// Tone amplitude used when rendering words.
const TONE_AMPLITUDE: f64 = 0.4;

/// Linear attack/release applied inside each word span.
const RAMP_SECONDS: f64 = 0.005;

/// Silence appended after the last word.
const TAIL_SECONDS: f64 = 0.10;

#[derive(Debug, Clone, PartialEq)]
pub enum SynthError {
    /// The corpus spec cannot produce a usable corpus; the message says why.
    DegenerateSpec(String),
    /// A word outside the corpus vocabulary.
    OutOfVocabulary { token: String },
    /// A pronunciation string that no vocabulary word produces.
    UnknownPronunciation { token: String },
}

impl core::fmt::Display for SynthError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SynthError::DegenerateSpec(why) => write!(f, "degenerate corpus spec: {why}"),
            SynthError::OutOfVocabulary { token } => {
                write!(f, "token {token:?} is not in the corpus vocabulary")
            }
            SynthError::UnknownPronunciation { token } => {
                write!(f, "pronunciation {token:?} matches no vocabulary word")
            }
        }
    }
}

impl core::error::Error for SynthError {}

/// Tone assignment for one vocabulary word.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ToneSpec {
    pub frequency_hz: f64,
    pub duration: f64,
}

/// Full description of a synthetic corpus. Identical specs generate
/// byte-identical corpora.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CorpusSpec {
    pub seed: u64,
    pub n_utterances: usize,
    /// Total vocabulary size including the three digit words.
    pub vocab_size: usize,
    /// Inclusive (min, max) words per utterance and per context sentence.
    pub words_per_utterance: (usize, usize),
    /// Preceding target-language sentences attached to each example.
    pub context_depth: usize,
    /// Silence between consecutive words.
    pub gap_seconds: f64,
    /// Fraction of utterances that contain the ambiguous word.
    pub context_dependent_fraction: f64,
    /// Word → tone assignment; filled in by [`CorpusSpec::new`], may be
    /// overridden before generation.
    pub tone_map: BTreeMap<String, ToneSpec>,
}

/// Smallest vocabulary that still carries every task: three digit
/// words, an ambiguous word, a trigger word and at least one plain word.
pub const MIN_VOCAB: usize = 6;

/// Largest vocabulary for which the geometric tone ladder stays safely
/// below the Nyquist band edge.
pub const MAX_VOCAB: usize = 26;

/// Word durations cycle through these values; all are multiples of the
/// 20 ms quantum so rendered spans sit exactly on the timestamp grid.
const DURATION_CYCLE: [f64; 4] = [0.30, 0.36, 0.42, 0.48];

impl CorpusSpec {
    /// A spec with derived tone assignments and default shape: 3..=6
    /// words per utterance, 2 context sentences, 40 ms gaps, a quarter
    /// of utterances context-dependent.
    pub fn new(seed: u64, n_utterances: usize, vocab_size: usize) -> Result<Self, SynthError> {
        let mut spec = Self {
            seed,
            n_utterances,
            vocab_size,
            words_per_utterance: (3, 6),
            context_depth: 2,
            gap_seconds: 0.04,
            context_dependent_fraction: 0.25,
            tone_map: BTreeMap::new(),
        };
        spec.validate_shape()?;
        for (i, word) in sample_vocabulary(&spec).into_iter().enumerate() {
            spec.tone_map.insert(
                word,
                ToneSpec {
                    // Geometric ladder: distinct, well separated on the
                    // mel scale, below the 8 kHz band edge.
                    frequency_hz: 320.0 * math::pow(1.13, i as f64),
                    duration: DURATION_CYCLE[i % DURATION_CYCLE.len()],
                },
            );
        }
        Ok(spec)
    }

    fn validate_shape(&self) -> Result<(), SynthError> {
        if self.n_utterances == 0 {
            return Err(SynthError::DegenerateSpec("zero utterances".to_string()));
        }
        if self.vocab_size < MIN_VOCAB || self.vocab_size > MAX_VOCAB {
            return Err(SynthError::DegenerateSpec(format!(
                "vocab_size {} outside [{MIN_VOCAB}, {MAX_VOCAB}]",
                self.vocab_size
            )));
        }
        let (lo, hi) = self.words_per_utterance;
        if lo == 0 || lo > hi {
            return Err(SynthError::DegenerateSpec(format!(
                "empty words_per_utterance range ({lo}, {hi})"
            )));
        }
        if self.gap_seconds < 0.0 {
            return Err(SynthError::DegenerateSpec("negative gap".to_string()));
        }
        if !(0.0..=1.0).contains(&self.context_dependent_fraction) {
            return Err(SynthError::DegenerateSpec(
                "context_dependent_fraction outside [0, 1]".to_string(),
            ));
        }
        if self.context_dependent_fraction > 0.0 && self.context_depth == 0 {
            return Err(SynthError::DegenerateSpec(
                "context-dependent examples need context_depth ≥ 1".to_string(),
            ));
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), SynthError> {
        self.validate_shape()?;
        for word in sample_vocabulary(self) {
            match self.tone_map.get(&word) {
                None => {
                    return Err(SynthError::DegenerateSpec(format!(
                        "tone_map missing word {word:?}"
                    )))
                }
                Some(tone) => {
                    if tone.duration <= 0.0 || !(50.0..7600.0).contains(&tone.frequency_hz) {
                        return Err(SynthError::DegenerateSpec(format!(
                            "unusable tone for {word:?}: {tone:?}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// One fully labeled utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthExample {
    pub audio: Audio,
    /// Raw transcription: lowercase words, no punctuation.
    pub transcript: String,
    /// Cased, punctuated, numeral-spelled form of the transcript.
    pub smoothed: String,
    /// Target-language rendering (cipher images in reversed word order).
    pub translation: String,
    /// Toy phoneme string, one hyphen-joined group per word.
    pub pronunciation: String,
    /// Gloss for terminology words, when the transcript contains any.
    pub explanation: Option<String>,
    /// One span per transcript word, sorted, non-overlapping.
    pub word_spans: Vec<TimedSegment>,
    /// Preceding target-language sentences, oldest first.
    pub context: Vec<String>,
}

/// Derived vocabulary structures shared by generation, translation and
/// the prompt/vocabulary builders.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    /// Source vocabulary; sampled CVCV words first, digit words last.
    words: Vec<String>,
    /// Base cipher image (reversed spelling) per word.
    images: BTreeMap<String, String>,
    ambiguous: String,
    ambiguous_alt: String,
    trigger: String,
    terminology: BTreeSet<String>,
}

fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// The deterministic source vocabulary of a spec: `vocab_size - 3`
/// distinct CVCV words drawn from the seed, then the digit words.
fn sample_vocabulary(spec: &CorpusSpec) -> Vec<String> {
    let mut rng = substream(spec.seed, u64::MAX);
    let mut seen = BTreeSet::new();
    let mut words = Vec::new();
    while words.len() < spec.vocab_size - DIGIT_WORDS.len() {
        let mut w = String::with_capacity(4);
        w.push(CONSONANTS[rng.random_range(0..CONSONANTS.len())] as char);
        w.push(VOWELS[rng.random_range(0..VOWELS.len())] as char);
        w.push(CONSONANTS[rng.random_range(0..CONSONANTS.len())] as char);
        w.push(VOWELS[rng.random_range(0..VOWELS.len())] as char);
        // Digit words "five" and "nine" are themselves CVCV strings;
        // skip them so the explicit digit entries stay unique.
        if DIGIT_WORDS.iter().any(|(d, _)| *d == w) || !seen.insert(w.clone()) {
            continue;
        }
        words.push(w);
    }
    words.extend(DIGIT_WORDS.iter().map(|(d, _)| d.to_string()));
    words
}

impl Lexicon {
    pub fn from_spec(spec: &CorpusSpec) -> Result<Self, SynthError> {
        spec.validate()?;
        let words = sample_vocabulary(spec);
        let images: BTreeMap<String, String> = words
            .iter()
            .map(|w| (w.clone(), w.chars().rev().collect()))
            .collect();
        let ambiguous = words[1].clone();
        // 'z' is outside the consonant set, so the alternate image can
        // never collide with any base image.
        let ambiguous_alt = format!("z{}", images[&ambiguous]);
        let trigger = images[&words[2]].clone();
        let terminology = words[..spec.vocab_size - DIGIT_WORDS.len()]
            .iter()
            .step_by(2)
            .cloned()
            .collect();
        Ok(Self { words, images, ambiguous, ambiguous_alt, trigger, terminology })
    }

    /// Source vocabulary, digit words last.
    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// The word whose cipher image depends on context.
    pub fn ambiguous_word(&self) -> &str {
        &self.ambiguous
    }

    /// Target-language word that, when present in context, flips the
    /// ambiguous word to its alternate image.
    pub fn trigger(&self) -> &str {
        &self.trigger
    }

    /// Base cipher image of a vocabulary word (the context-free image
    /// for the ambiguous word).
    pub fn image(&self, word: &str) -> Result<&str, SynthError> {
        self.images
            .get(word)
            .map(String::as_str)
            .ok_or_else(|| SynthError::OutOfVocabulary { token: word.to_string() })
    }

    /// Alternate image of the ambiguous word.
    pub fn ambiguous_alt_image(&self) -> &str {
        &self.ambiguous_alt
    }

    /// Terminology subset (even-indexed non-digit words) that receives
    /// explanations.
    pub fn terminology(&self) -> impl Iterator<Item = &str> {
        self.terminology.iter().map(String::as_str)
    }

    /// Does any context sentence contain the trigger word?
    pub fn trigger_in_context<S: AsRef<str>>(&self, context: &[S]) -> bool {
        context
            .iter()
            .any(|s| s.as_ref().split_whitespace().any(|w| w == self.trigger))
    }

    /// Cipher-translate a source sentence: per-word images (the
    /// ambiguous word resolved through `trigger_present`), then the
    /// whole sentence reversed.
    pub fn translate_words(
        &self,
        words: &[&str],
        trigger_present: bool,
    ) -> Result<String, SynthError> {
        let mut images = Vec::with_capacity(words.len());
        for w in words {
            if *w == self.ambiguous && trigger_present {
                images.push(self.ambiguous_alt.as_str());
            } else {
                images.push(self.image(w)?);
            }
        }
        images.reverse();
        Ok(images.join(" "))
    }

    /// Translate a raw transcript given its context sentences.
    pub fn translate<S: AsRef<str>>(
        &self,
        transcript: &str,
        context: &[S],
    ) -> Result<String, SynthError> {
        let words: Vec<&str> = transcript.split_whitespace().collect();
        self.translate_words(&words, self.trigger_in_context(context))
    }

    /// Per-character pseudo-phonemes: each word becomes its letters
    /// joined by hyphens; words stay whitespace-separated.
    pub fn phonetize(&self, text: &str) -> Result<String, SynthError> {
        let mut out = Vec::new();
        for word in text.split_whitespace() {
            if !self.images.contains_key(word) {
                return Err(SynthError::OutOfVocabulary { token: word.to_string() });
            }
            let letters: Vec<String> = word.chars().map(String::from).collect();
            out.push(letters.join("-"));
        }
        Ok(out.join(" "))
    }

    /// Inverse of [`Lexicon::phonetize`].
    pub fn unphonetize(&self, pronunciation: &str) -> Result<String, SynthError> {
        let mut out = Vec::new();
        for group in pronunciation.split_whitespace() {
            let word: String = group.split('-').collect();
            if !self.images.contains_key(&word) {
                return Err(SynthError::UnknownPronunciation { token: group.to_string() });
            }
            out.push(word);
        }
        Ok(out.join(" "))
    }

    /// Gloss for the terminology words of a transcript, first-occurrence
    /// order, or `None` when it contains none.
    pub fn explanation(&self, transcript: &str) -> Option<String> {
        let mut seen = BTreeSet::new();
        let mut parts = Vec::new();
        for word in transcript.split_whitespace() {
            if self.terminology.contains(word) && seen.insert(word) {
                parts.push(format!("{} means {}", self.images[word], word));
            }
        }
        if parts.is_empty() {
            None
        } else {
            Some(parts.join(" and "))
        }
    }

    /// Every surface token the corpus can emit: raw/cased/punctuated
    /// source forms, numerals, cipher images (both ambiguous variants),
    /// pronunciations and gloss glue words. The model vocabulary builds
    /// on this set.
    pub fn surface_forms(&self) -> BTreeSet<String> {
        let mut forms = BTreeSet::new();
        for word in &self.words {
            forms.insert(word.clone());
            forms.insert(capitalize(word));
            forms.insert(format!("{word}."));
            forms.insert(format!("{}.", capitalize(word)));
            forms.insert(self.images[word].clone());
            forms.insert(self.phonetize(word).expect("vocab word phonetizes"));
        }
        for (_, numeral) in DIGIT_WORDS {
            forms.insert(numeral.to_string());
            forms.insert(format!("{numeral}."));
        }
        forms.insert(self.ambiguous_alt.clone());
        forms.insert("means".to_string());
        forms.insert("and".to_string());
        forms
    }
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        None => String::new(),
        Some(first) => first.to_uppercase().chain(chars).collect(),
    }
}

/// Inverse text normalization: spell digit words as numerals, capitalize
/// the first word, append a terminal period. Total and idempotent.
pub fn apply_itn(raw: &str) -> String {
    let mut words: Vec<String> = raw
        .split_whitespace()
        .map(|w| {
            DIGIT_WORDS
                .iter()
                .find(|(d, _)| *d == w)
                .map_or_else(|| w.to_string(), |(_, n)| n.to_string())
        })
        .collect();
    if words.is_empty() {
        return String::new();
    }
    words[0] = capitalize(&words[0]);
    let mut out = words.join(" ");
    if !out.ends_with('.') {
        out.push('.');
    }
    out
}

/// Word spans for the given durations: the first word starts at `lead`,
/// consecutive words are separated by `gap` seconds of silence.
pub fn layout_spans(durations: &[f64], lead: f64, gap: f64) -> Vec<(f64, f64)> {
    let mut spans = Vec::with_capacity(durations.len());
    let mut cursor = lead;
    for (i, d) in durations.iter().enumerate() {
        if i > 0 {
            cursor += gap;
        }
        spans.push((cursor, cursor + d));
        cursor += d;
    }
    spans
}

/// Render tone-pattern audio for the given words and spans.
fn render_audio(spec: &CorpusSpec, words: &[&str], spans: &[(f64, f64)]) -> Audio {
    let total = spans.last().map_or(0.0, |(_, end)| *end) + TAIL_SECONDS;
    let rate = f64::from(SAMPLE_RATE);
    let mut samples = alloc::vec![0.0; math::round(total * rate) as usize];
    let ramp_samples = RAMP_SECONDS * rate;
    for (word, (start, end)) in words.iter().zip(spans) {
        let tone = spec.tone_map[*word];
        let begin = math::round(start * rate) as usize;
        let finish = (math::round(end * rate) as usize).min(samples.len());
        let omega = 2.0 * core::f64::consts::PI * tone.frequency_hz / rate;
        for (k, slot) in samples[begin..finish].iter_mut().enumerate() {
            let envelope = (k as f64 / ramp_samples)
                .min((finish - begin - 1 - k) as f64 / ramp_samples)
                .min(1.0);
            *slot = TONE_AMPLITUDE * envelope * math::sin(omega * k as f64);
        }
    }
    Audio::new(samples, SAMPLE_RATE)
}

/// Is utterance `i` context-dependent, and if so which variant? Both are
/// pure functions of the index so generation can run in parallel:
/// context-dependent utterances are spaced so that exactly
/// `floor(n · fraction)` of the first `n` qualify, and variants
/// alternate among them for an exact 50/50 split.
fn context_dependence(i: usize, fraction: f64) -> Option<bool> {
    dependence_ordinal(i, fraction).map(|ord| ord % 2 == 1)
}

/// Ordinal of utterance `i` among the context-dependent ones, or `None`
/// when it is not context-dependent.
fn dependence_ordinal(i: usize, fraction: f64) -> Option<u64> {
    let before = math::floor(i as f64 * fraction + 1e-9) as u64;
    let with = math::floor((i + 1) as f64 * fraction + 1e-9) as u64;
    (with > before).then_some(before)
}

/// Substream namespace for the shared main sentence of a variant pair;
/// far above any per-utterance index.
const PAIR_STREAM_BASE: u64 = 1 << 40;

fn sample_sentence(
    rng: &mut ChaCha8Rng,
    pool: &[&str],
    range: (usize, usize),
) -> Vec<String> {
    let n = rng.random_range(range.0..=range.1);
    (0..n).map(|_| pool[rng.random_range(0..pool.len())].to_string()).collect()
}

/// Generate utterance `index` of the corpus described by `spec`.
pub fn gen_example(
    spec: &CorpusSpec,
    lex: &Lexicon,
    index: usize,
) -> Result<SynthExample, SynthError> {
    let mut rng = substream(spec.seed, index as u64);
    let variant = context_dependence(index, spec.context_dependent_fraction);

    // The ambiguous word enters transcripts only by explicit insertion
    // below, and the trigger's source word is kept out of contexts where
    // the alternate image must not fire.
    let plain_pool: Vec<&str> = lex
        .words()
        .iter()
        .map(String::as_str)
        .filter(|w| *w != lex.ambiguous_word())
        .collect();
    let triggerless_pool: Vec<&str> = plain_pool
        .iter()
        .copied()
        .filter(|w| lex.image(w).expect("pool word in vocab") != lex.trigger())
        .collect();

    let mut context = Vec::with_capacity(spec.context_depth);
    for s in 0..spec.context_depth {
        let mut words = match variant {
            Some(false) => sample_sentence(&mut rng, &triggerless_pool, spec.words_per_utterance),
            _ => sample_sentence(&mut rng, &plain_pool, spec.words_per_utterance),
        };
        if variant == Some(true) && s + 1 == spec.context_depth {
            // Force the trigger's source word into the last context
            // sentence so its image appears in the rendered context.
            let at = rng.random_range(0..words.len());
            let trigger_source = lex
                .words()
                .iter()
                .find(|w| lex.image(w).unwrap() == lex.trigger())
                .expect("trigger has a source word");
            words[at] = trigger_source.clone();
        }
        let refs: Vec<&str> = words.iter().map(String::as_str).collect();
        context.push(lex.translate_words(&refs, false)?);
    }

    // Context-dependent utterances come in complementary pairs: the 2k-th
    // and (2k+1)-th of them draw their main sentence and lead-in from one
    // shared stream, so both members have identical transcripts, spans,
    // and audio and differ only in context — and hence in how the
    // ambiguous word translates. Stripped of context, the members of a
    // pair are indistinguishable while their targets conflict, which pins
    // no-context accuracy on the ambiguous word at exactly one half.
    let mut main_rng = match dependence_ordinal(index, spec.context_dependent_fraction) {
        Some(ord) => substream(spec.seed, PAIR_STREAM_BASE + ord / 2),
        None => rng,
    };
    let mut words = sample_sentence(&mut main_rng, &plain_pool, spec.words_per_utterance);
    if variant.is_some() {
        let at = main_rng.random_range(0..words.len());
        words[at] = lex.ambiguous_word().to_string();
    }

    // Lead-in silence from the 20 ms grid keeps spans grid-exact.
    let lead = 0.02 * main_rng.random_range(5..=15) as f64;
    let durations: Vec<f64> = words.iter().map(|w| spec.tone_map[w].duration).collect();
    let spans = layout_spans(&durations, lead, spec.gap_seconds);
    let word_refs: Vec<&str> = words.iter().map(String::as_str).collect();
    let audio = render_audio(spec, &word_refs, &spans);

    let transcript = words.join(" ");
    let trigger_present = lex.trigger_in_context(&context);
    debug_assert_eq!(
        variant.map_or(trigger_present, |b| b),
        trigger_present,
        "context construction must realize the chosen variant"
    );
    let translation = lex.translate_words(&word_refs, trigger_present)?;

    Ok(SynthExample {
        smoothed: apply_itn(&transcript),
        pronunciation: lex.phonetize(&transcript)?,
        explanation: lex.explanation(&transcript),
        translation,
        transcript,
        word_spans: words
            .iter()
            .zip(&spans)
            .map(|(w, (s, e))| TimedSegment::new(*s, *e, w.clone()))
            .collect(),
        context,
        audio,
    })
}

/// Generate the whole corpus. Equivalent to calling [`gen_example`] for
/// each index.
pub fn gen_corpus(spec: &CorpusSpec) -> Result<Vec<SynthExample>, SynthError> {
    let lex = Lexicon::from_spec(spec)?;
    (0..spec.n_utterances).map(|i| gen_example(spec, &lex, i)).collect()
}

/// Concatenate examples into one long waveform. Returns the audio and
/// every word span shifted to global stream time.
pub fn stitch(examples: &[SynthExample]) -> (Audio, Vec<TimedSegment>) {
    let mut samples = Vec::new();
    let mut spans = Vec::new();
    let mut offset = 0.0;
    for ex in examples {
        spans.extend(ex.word_spans.iter().map(|s| s.offset(offset)));
        samples.extend_from_slice(&ex.audio.samples);
        offset += ex.audio.duration();
    }
    (Audio::new(samples, SAMPLE_RATE), spans)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timestamp::QUANTUM_SECONDS;

    fn spec() -> CorpusSpec {
        CorpusSpec::new(7, 64, 20).unwrap()
    }

    #[test]
    fn corpus_is_reproducible() {
        let a = gen_corpus(&spec()).unwrap();
        let b = gen_corpus(&spec()).unwrap();
        assert_eq!(a.len(), 64);
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ() {
        let a = gen_corpus(&CorpusSpec::new(7, 4, 20).unwrap()).unwrap();
        let b = gen_corpus(&CorpusSpec::new(8, 4, 20).unwrap()).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn span_layout_from_durations() {
        let spans = layout_spans(&[0.40, 0.35], 0.0, 0.05);
        assert_eq!(spans, alloc::vec![(0.0, 0.40), (0.45, 0.80)]);
        assert_eq!(layout_spans(&[], 0.0, 0.05), alloc::vec![]);
    }

    #[test]
    fn degenerate_specs_rejected() {
        assert!(CorpusSpec::new(1, 0, 20).is_err());
        assert!(CorpusSpec::new(1, 4, 2).is_err());
        assert!(CorpusSpec::new(1, 4, 64).is_err());
        let mut bad = spec();
        bad.words_per_utterance = (4, 3);
        assert!(bad.validate().is_err());
        let mut bad = spec();
        bad.context_depth = 0;
        assert!(matches!(bad.validate(), Err(SynthError::DegenerateSpec(_))));
        let mut bad = spec();
        bad.tone_map.remove(&bad.tone_map.keys().next().unwrap().clone());
        assert!(bad.validate().is_err());
    }

    #[test]
    fn example_invariants() {
        let spec = spec();
        let lex = Lexicon::from_spec(&spec).unwrap();
        for ex in gen_corpus(&spec).unwrap() {
            let words: alloc::vec::Vec<&str> = ex.transcript.split_whitespace().collect();
            assert_eq!(words.len(), ex.word_spans.len());
            assert_eq!(ex.context.len(), spec.context_depth);
            let duration = ex.audio.duration();
            let mut prev_end = 0.0;
            for span in &ex.word_spans {
                assert!(span.start >= prev_end);
                assert!(span.end > span.start);
                assert!(span.end <= duration + 1e-9);
                prev_end = span.end;
                // Grid-exact boundaries.
                for t in [span.start, span.end] {
                    let steps = t / QUANTUM_SECONDS;
                    assert!((steps - math::round(steps)).abs() < 1e-9, "{t} off grid");
                }
            }
            assert_eq!(ex.translation, lex.translate(&ex.transcript, &ex.context).unwrap());
            assert_eq!(ex.smoothed, apply_itn(&ex.transcript));
            assert_eq!(ex.pronunciation, lex.phonetize(&ex.transcript).unwrap());
        }
    }

    #[test]
    fn cipher_is_bijective_and_disjoint() {
        let lex = Lexicon::from_spec(&spec()).unwrap();
        let mut images = BTreeSet::new();
        for w in lex.words() {
            let img = lex.image(w).unwrap();
            assert!(images.insert(img.to_string()), "duplicate image {img}");
            // Brute-force inversion: exactly one word maps to img.
            let sources: alloc::vec::Vec<&String> = lex
                .words()
                .iter()
                .filter(|v| lex.image(v).unwrap() == img)
                .collect();
            assert_eq!(sources, alloc::vec![w]);
            assert!(!images.contains(w.as_str()) || w.chars().rev().eq(w.chars()));
        }
        // The alternate ambiguous image collides with nothing.
        assert!(!images.contains(lex.ambiguous_alt_image()));
        // Images never shadow source words (source CVCV vs image VCVC).
        for w in lex.words() {
            assert!(lex.image(w).unwrap() != w.as_str());
            assert!(!images.contains(w.as_str()));
        }
    }

    #[test]
    fn translation_reverses_word_order() {
        let lex = Lexicon::from_spec(&spec()).unwrap();
        let w: alloc::vec::Vec<&str> = lex.words().iter().take(3).map(String::as_str).collect();
        let sentence = w.join(" ");
        let translated = lex.translate(&sentence, &[] as &[&str]).unwrap();
        let images: alloc::vec::Vec<&str> = translated.split_whitespace().collect();
        assert_eq!(images.len(), 3);
        assert_eq!(images[0], lex.image(w[2]).unwrap());
        assert_eq!(images[2], lex.image(w[0]).unwrap());
    }

    #[test]
    fn ambiguous_word_flips_on_trigger() {
        let lex = Lexicon::from_spec(&spec()).unwrap();
        let amb = lex.ambiguous_word().to_string();
        let with = lex
            .translate(&amb, &[format!("pada {} rolu", lex.trigger())])
            .unwrap();
        let without = lex.translate(&amb, &["pada rolu".to_string()]).unwrap();
        assert_eq!(with, lex.ambiguous_alt_image());
        assert_eq!(without, lex.image(&amb).unwrap());
        assert_ne!(with, without);
    }

    #[test]
    fn ambiguous_variants_are_balanced() {
        let spec = spec();
        let lex = Lexicon::from_spec(&spec).unwrap();
        let examples = gen_corpus(&spec).unwrap();
        let mut base = 0usize;
        let mut alt = 0usize;
        for ex in &examples {
            if !ex.transcript.split_whitespace().any(|w| w == lex.ambiguous_word()) {
                // Trigger may appear incidentally, but without the
                // ambiguous word nothing depends on it.
                continue;
            }
            if ex.translation.split_whitespace().any(|w| w == lex.ambiguous_alt_image()) {
                alt += 1;
                assert!(lex.trigger_in_context(&ex.context));
            } else {
                base += 1;
                assert!(!lex.trigger_in_context(&ex.context));
            }
        }
        assert_eq!(base + alt, 16, "a quarter of 64 utterances are context-dependent");
        assert_eq!(base, alt, "variants must be marginally balanced");
    }

    /// Consecutive context-dependent utterances form complementary
    /// pairs: same words, same audio, opposite ambiguous-word images.
    /// This is what makes them unsolvable without context even for a
    /// model that has memorized every utterance.
    #[test]
    fn context_dependent_examples_pair_up_indistinguishably() {
        let spec = spec();
        let lex = Lexicon::from_spec(&spec).unwrap();
        let examples = gen_corpus(&spec).unwrap();
        let dependent: Vec<&SynthExample> = examples
            .iter()
            .filter(|ex| {
                ex.transcript.split_whitespace().any(|w| w == lex.ambiguous_word())
            })
            .collect();
        assert_eq!(dependent.len() % 2, 0);
        for pair in dependent.chunks(2) {
            let (a, b) = (pair[0], pair[1]);
            assert_eq!(a.transcript, b.transcript);
            assert_eq!(a.word_spans, b.word_spans);
            assert_eq!(a.audio.samples, b.audio.samples);
            assert_ne!(a.translation, b.translation);
            assert_ne!(a.context, b.context);
            // Exactly one member of the pair uses the alternate image.
            let alts = pair
                .iter()
                .filter(|ex| {
                    ex.translation
                        .split_whitespace()
                        .any(|w| w == lex.ambiguous_alt_image())
                })
                .count();
            assert_eq!(alts, 1);
        }
    }

    #[test]
    fn phonetize_examples() {
        let lex = Lexicon::from_spec(&spec()).unwrap();
        assert_eq!(lex.phonetize("").unwrap(), "");
        assert_eq!(lex.phonetize("two").unwrap(), "t-w-o");
        let word = lex.words()[0].clone();
        let pron = lex.phonetize(&word).unwrap();
        assert_eq!(pron.matches('-').count(), word.chars().count() - 1);
        assert!(matches!(
            lex.phonetize("xyzzy"),
            Err(SynthError::OutOfVocabulary { .. })
        ));
    }

    #[test]
    fn phonetize_round_trips_whole_vocabulary() {
        let lex = Lexicon::from_spec(&spec()).unwrap();
        for w in lex.words() {
            let pron = lex.phonetize(w).unwrap();
            assert_eq!(lex.unphonetize(&pron).unwrap(), *w);
        }
        assert!(lex.unphonetize("q-q").is_err());
    }

    #[test]
    fn itn_rules() {
        assert_eq!(apply_itn("kato bemi"), "Kato bemi.");
        assert_eq!(apply_itn(""), "");
        assert_eq!(apply_itn("two kato five"), "2 kato 5.");
        // Idempotence.
        for raw in ["kato bemi", "two kato", "", "nine"] {
            let once = apply_itn(raw);
            assert_eq!(apply_itn(&once), once);
        }
    }

    #[test]
    fn explanations_cover_terminology() {
        let spec = spec();
        let lex = Lexicon::from_spec(&spec).unwrap();
        let term: alloc::vec::Vec<&str> = lex.terminology().collect();
        assert!(!term.is_empty());
        let word = term[0];
        let gloss = lex.explanation(&format!("{word} {word}")).unwrap();
        assert_eq!(gloss, format!("{} means {}", lex.image(word).unwrap(), word));
        // Non-terminology-only sentences get no explanation.
        let odd = &lex.words()[1];
        assert_eq!(lex.explanation(odd), None);
        // Digit words are not terminology.
        assert!(lex.terminology().all(|w| DIGIT_WORDS.iter().all(|(d, _)| *d != w)));
    }

    /// Recover word boundaries from the waveform alone and compare with
    /// the labeled spans, frame by frame at the 20 ms grid.
    #[test]
    fn energy_onsets_match_spans() {
        let spec = spec();
        for ex in gen_corpus(&spec).unwrap().iter().take(8) {
            let frame_len = (QUANTUM_SECONDS * f64::from(SAMPLE_RATE)) as usize;
            let frames = ex.audio.samples.len() / frame_len;
            let detected: alloc::vec::Vec<bool> = (0..frames)
                .map(|f| {
                    let chunk = &ex.audio.samples[f * frame_len..(f + 1) * frame_len];
                    let energy: f64 = chunk.iter().map(|x| x * x).sum::<f64>();
                    math::sqrt(energy / frame_len as f64) > 0.01
                })
                .collect();
            let labeled: alloc::vec::Vec<bool> = (0..frames)
                .map(|f| {
                    let fs = f as f64 * QUANTUM_SECONDS;
                    let fe = fs + QUANTUM_SECONDS;
                    ex.word_spans
                        .iter()
                        .any(|s| s.end.min(fe) - s.start.max(fs) > 1e-9)
                })
                .collect();
            // Spans are grid-aligned, so detection is exact up to one
            // frame at each boundary.
            let mismatches = detected
                .iter()
                .zip(&labeled)
                .filter(|(d, l)| d != l)
                .count();
            assert_eq!(
                mismatches, 0,
                "detected {detected:?}\nlabeled {labeled:?}"
            );
        }
    }

    #[test]
    fn stitch_concatenates_audio_and_spans() {
        let spec = CorpusSpec::new(3, 4, 20).unwrap();
        let examples = gen_corpus(&spec).unwrap();
        let (audio, spans) = stitch(&examples);
        let total: usize = examples.iter().map(|e| e.audio.samples.len()).sum();
        assert_eq!(audio.samples.len(), total);
        let n_words: usize = examples.iter().map(|e| e.word_spans.len()).sum();
        assert_eq!(spans.len(), n_words);
        // Spans stay sorted across the utterance boundary.
        for pair in spans.windows(2) {
            assert!(pair[0].end <= pair[1].start + 1e-9);
        }
        // The second example's first span is offset by the first
        // example's duration.
        let offset = examples[0].audio.duration();
        let k = examples[0].word_spans.len();
        assert!((spans[k].start - (examples[1].word_spans[0].start + offset)).abs() < 1e-9);
    }

    #[test]
    fn context_dependence_schedule() {
        // fraction 0.25 → every fourth utterance, variants alternating.
        let flags: alloc::vec::Vec<Option<bool>> =
            (0..16).map(|i| context_dependence(i, 0.25)).collect();
        let cd: alloc::vec::Vec<usize> =
            (0..16).filter(|i| flags[*i].is_some()).collect();
        assert_eq!(cd.len(), 4);
        let variants: alloc::vec::Vec<bool> =
            cd.iter().map(|i| flags[*i].unwrap()).collect();
        assert_eq!(variants, alloc::vec![false, true, false, true]);
        // fraction 0 → never.
        assert!((0..50).all(|i| context_dependence(i, 0.0).is_none()));
        // fraction 1 → always.
        assert!((0..50).all(|i| context_dependence(i, 1.0).is_some()));
    }
}
