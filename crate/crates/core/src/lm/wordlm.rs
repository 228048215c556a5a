//! Word-level n-gram models: training, scoring and perplexity.

use super::ngram::{KneserNeyConfig, NGramLm, TokenId, UNK};
use crate::error::{Error, Result};

/// Whitespace-tokenized sentences, one per non-empty line.
pub fn word_sentences<S: AsRef<str>>(lines: &[S]) -> Vec<Vec<String>> {
    lines
        .iter()
        .map(|l| l.as_ref().split_whitespace().map(String::from).collect::<Vec<_>>())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Trains an interpolated Kneser-Ney word model with `<s>`, `</s>` and `<unk>`.
pub fn train_word_ngram<S: AsRef<str>>(lines: &[S], order: usize, discount: f64) -> Result<NGramLm> {
    let sentences = word_sentences(lines);
    if sentences.is_empty() {
        return Err(Error::invalid("word LM corpus is empty"));
    }
    NGramLm::train_kneser_ney(&sentences, KneserNeyConfig::new(order).with_discount(discount))
}

/// Log10 `P(word | context)` with unknown words mapped to `<unk>`.
///
/// `context` is oldest-first; `"<s>"` may be passed explicitly.
pub fn word_score(lm: &NGramLm, context: &[&str], word: &str) -> f64 {
    let ctx: Vec<TokenId> = context.iter().filter_map(|w| lm.id_or_unk(w)).collect();
    match lm.id_or_unk(word) {
        Some(id) => lm.log10_prob(&ctx, id),
        None => super::ngram::BOS_LOG10_PROB,
    }
}

/// Words of the model vocabulary that are not reserved symbols.
pub fn vocabulary(lm: &NGramLm) -> Vec<&str> {
    let mut words: Vec<&str> = lm
        .vocab()
        .iter()
        .map(String::as_str)
        .filter(|w| !matches!(*w, "<s>" | "</s>" | UNK))
        .collect();
    words.sort_unstable();
    words
}

/// Perplexity over whole sentences, counting `</s>` as a predicted token.
pub fn perplexity<S: AsRef<str>>(lm: &NGramLm, lines: &[S]) -> Result<f64> {
    let mut log10_total = 0.0;
    let mut count = 0usize;
    for sentence in word_sentences(lines) {
        let ids: Vec<TokenId> = sentence.iter().filter_map(|w| lm.id_or_unk(w)).collect();
        log10_total += lm.sentence_log10_prob(&ids);
        count += ids.len() + 1;
    }
    if count == 0 {
        return Err(Error::invalid("perplexity needs non-empty text"));
    }
    Ok(10f64.powf(-log10_total / count as f64))
}
