//! Character-level language models behind one scoring interface.

use std::collections::HashSet;
use std::fmt::Debug;
use std::hash::Hash;

use super::ngram::{KneserNeyConfig, NGramLm, TokenId};
use crate::alphabet::SPACE_TOKEN;
use crate::error::{Error, Result};

/// Default n-gram order of the built-in character model.
pub const DEFAULT_CHAR_ORDER: usize = 7;
/// Sentences longer than this many characters are truncated before training.
pub const DEFAULT_MAX_SENTENCE_CHARS: usize = 128;

/// Scores one character at a time given an opaque context state.
///
/// Log-probabilities are natural logs.
pub trait CharLm {
    type State: Clone + Eq + Hash + Debug;

    /// State conditioned on sentence start only.
    fn initial_state(&mut self) -> Result<Self::State>;

    /// `ln P(c | state)` and the state advanced by `c`.
    fn score(&mut self, state: &Self::State, c: char) -> Result<(f64, Self::State)>;

    /// `ln P(</s> | state)` when the model predicts sentence ends.
    fn score_end(&mut self, _state: &Self::State) -> Result<Option<f64>> {
        Ok(None)
    }

    /// Whether `c` is scored as itself rather than as the unknown symbol.
    fn knows(&self, c: char) -> bool;
}

/// The LM token used for a character: space becomes `<sp>`.
pub fn char_token(c: char) -> String {
    if c == ' ' {
        SPACE_TOKEN.to_string()
    } else {
        c.to_string()
    }
}

/// Interpolated Kneser-Ney character n-gram model.
#[derive(Clone, Debug, PartialEq)]
pub struct CharNGram {
    lm: NGramLm,
}

impl CharNGram {
    pub fn new(lm: NGramLm) -> Result<Self> {
        if lm.bos().is_none() {
            return Err(Error::invalid("character LM lacks a <s> unigram"));
        }
        Ok(Self { lm })
    }

    pub fn ngram(&self) -> &NGramLm {
        &self.lm
    }

    pub fn into_ngram(self) -> NGramLm {
        self.lm
    }

    fn id_of(&self, c: char) -> Option<TokenId> {
        self.lm.id_or_unk(&char_token(c))
    }

    /// `ln P(c | state)` without mutable access.
    pub fn log_prob(&self, state: &[TokenId], c: char) -> f64 {
        match self.id_of(c) {
            Some(id) => self.lm.log10_prob(state, id) * std::f64::consts::LN_10,
            None => f64::NEG_INFINITY,
        }
    }

    pub fn advance(&self, state: &[TokenId], c: char) -> Vec<TokenId> {
        let mut next = state.to_vec();
        next.extend(self.id_of(c));
        self.lm.trim_context(&next)
    }
}

impl CharLm for CharNGram {
    type State = Vec<TokenId>;

    fn initial_state(&mut self) -> Result<Self::State> {
        Ok(self.lm.bos().into_iter().collect())
    }

    fn score(&mut self, state: &Self::State, c: char) -> Result<(f64, Self::State)> {
        Ok((self.log_prob(state, c), self.advance(state, c)))
    }

    fn score_end(&mut self, state: &Self::State) -> Result<Option<f64>> {
        Ok(self
            .lm
            .eos()
            .map(|eos| self.lm.log10_prob(state, eos) * std::f64::consts::LN_10))
    }

    fn knows(&self, c: char) -> bool {
        self.lm.id(&char_token(c)).is_some()
    }
}

/// Lets one trained model serve several decodes at once.
impl CharLm for &CharNGram {
    type State = Vec<TokenId>;

    fn initial_state(&mut self) -> Result<Self::State> {
        Ok(self.lm.bos().into_iter().collect())
    }

    fn score(&mut self, state: &Self::State, c: char) -> Result<(f64, Self::State)> {
        Ok((self.log_prob(state, c), self.advance(state, c)))
    }

    fn score_end(&mut self, state: &Self::State) -> Result<Option<f64>> {
        Ok(self
            .lm
            .eos()
            .map(|eos| self.lm.log10_prob(state, eos) * std::f64::consts::LN_10))
    }

    fn knows(&self, c: char) -> bool {
        (**self).knows(c)
    }
}

/// Assigns `1 / size` to every symbol, sentence end included.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UniformCharLm {
    size: usize,
    known: Option<HashSet<char>>,
}

impl UniformCharLm {
    /// Uniform over `size` symbols; every character counts as known.
    pub fn new(size: usize) -> Self {
        assert!(size > 0, "uniform LM needs at least one symbol");
        Self { size, known: None }
    }

    /// Uniform over `chars` plus the sentence end.
    pub fn over(chars: impl IntoIterator<Item = char>) -> Self {
        let known: HashSet<char> = chars.into_iter().collect();
        Self {
            size: known.len() + 1,
            known: Some(known),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    fn log_prob(&self) -> f64 {
        -(self.size as f64).ln()
    }
}

impl CharLm for UniformCharLm {
    type State = ();

    fn initial_state(&mut self) -> Result<()> {
        Ok(())
    }

    fn score(&mut self, _state: &(), _c: char) -> Result<(f64, ())> {
        Ok((self.log_prob(), ()))
    }

    fn score_end(&mut self, _state: &()) -> Result<Option<f64>> {
        Ok(Some(self.log_prob()))
    }

    fn knows(&self, c: char) -> bool {
        self.known.as_ref().is_none_or(|k| k.contains(&c))
    }
}

/// Splits corpus lines into character token sequences, truncated to `max_chars`.
pub fn char_sentences<S: AsRef<str>>(lines: &[S], max_chars: usize) -> Vec<Vec<String>> {
    lines
        .iter()
        .map(|l| l.as_ref().trim_end_matches('\r'))
        .filter(|l| !l.is_empty())
        .map(|l| l.chars().take(max_chars).map(char_token).collect())
        .collect()
}

/// Trains an interpolated Kneser-Ney character model on one sentence per line.
pub fn train_char_ngram<S: AsRef<str>>(
    lines: &[S],
    order: usize,
    discount: f64,
    max_chars: usize,
) -> Result<CharNGram> {
    let sentences = char_sentences(lines, max_chars);
    if sentences.is_empty() {
        return Err(Error::invalid("character LM corpus is empty"));
    }
    CharNGram::new(NGramLm::train_kneser_ney(
        &sentences,
        KneserNeyConfig::new(order).with_discount(discount),
    )?)
}

/// Average negative log2 probability per predicted symbol.
///
/// Every character of every non-empty line is predicted, plus the sentence
/// end when the model scores it; `<s>` is context only.
pub fn bits_per_character<L: CharLm, S: AsRef<str>>(lm: &mut L, lines: &[S]) -> Result<f64> {
    let mut bits = 0.0;
    let mut count = 0usize;
    for line in lines {
        let line = line.as_ref().trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let mut state = lm.initial_state()?;
        for c in line.chars() {
            let (lp, next) = lm.score(&state, c)?;
            bits -= lp / std::f64::consts::LN_2;
            count += 1;
            state = next;
        }
        if let Some(lp) = lm.score_end(&state)? {
            bits -= lp / std::f64::consts::LN_2;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::invalid("BPC needs non-empty text"));
    }
    Ok(bits / count as f64)
}
