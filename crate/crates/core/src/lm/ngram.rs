//! Backoff n-gram models with interpolated Kneser-Ney estimation.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";
/// Log10 probability given to `<s>`, which is never predicted.
pub const BOS_LOG10_PROB: f64 = -99.0;
pub const DEFAULT_DISCOUNT: f64 = 0.75;

pub type TokenId = u32;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NGramEntry {
    pub log10_prob: f64,
    /// Log10 backoff weight; `None` when the n-gram never acts as a context.
    pub backoff: Option<f64>,
}

/// Backoff n-gram model over an arbitrary token vocabulary.
///
/// `grams[k - 1]` holds the k-grams. Scoring follows the usual backoff rule:
/// the longest stored n-gram wins, plus the backoff weights of every longer
/// context that was skipped.
#[derive(Clone, Debug, PartialEq)]
pub struct NGramLm {
    order: usize,
    vocab: Vec<String>,
    ids: HashMap<String, TokenId>,
    grams: Vec<HashMap<Vec<TokenId>, NGramEntry>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KneserNeyConfig {
    pub order: usize,
    pub discount: f64,
}

impl KneserNeyConfig {
    pub fn new(order: usize) -> Self {
        Self {
            order,
            discount: DEFAULT_DISCOUNT,
        }
    }

    pub fn with_discount(mut self, discount: f64) -> Self {
        self.discount = discount;
        self
    }
}

impl NGramLm {
    /// Assembles a model from explicit tables, e.g. as read from ARPA.
    pub fn from_tables(
        order: usize,
        grams: Vec<Vec<(Vec<String>, NGramEntry)>>,
    ) -> Result<Self> {
        if order == 0 || grams.len() != order {
            return Err(Error::invalid("model order does not match the n-gram tables"));
        }
        let mut lm = Self {
            order,
            vocab: Vec::new(),
            ids: HashMap::new(),
            grams: vec![HashMap::new(); order],
        };
        for (word, _) in &grams[0] {
            if word.len() != 1 {
                return Err(Error::invalid("unigram table entry has the wrong length"));
            }
            lm.intern(&word[0]);
        }
        for (k, table) in grams.into_iter().enumerate() {
            for (words, entry) in table {
                if words.len() != k + 1 {
                    return Err(Error::invalid(format!("{}-gram table holds a {}-gram", k + 1, words.len())));
                }
                let key = words
                    .iter()
                    .map(|w| {
                        lm.ids.get(w).copied().ok_or_else(|| {
                            Error::invalid(format!("token {w:?} appears in a {}-gram but not as a unigram", k + 1))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                lm.grams[k].insert(key, entry);
            }
        }
        Ok(lm)
    }

    fn intern(&mut self, token: &str) -> TokenId {
        if let Some(&id) = self.ids.get(token) {
            return id;
        }
        let id = self.vocab.len() as TokenId;
        self.vocab.push(token.to_string());
        self.ids.insert(token.to_string(), id);
        id
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.vocab[id as usize]
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.ids.get(token).copied()
    }

    /// Id of `token`, falling back to `<unk>` when it is out of vocabulary.
    pub fn id_or_unk(&self, token: &str) -> Option<TokenId> {
        self.id(token).or_else(|| self.id(UNK))
    }

    pub fn bos(&self) -> Option<TokenId> {
        self.id(BOS)
    }

    pub fn eos(&self) -> Option<TokenId> {
        self.id(EOS)
    }

    /// Tokens that can be predicted: everything except `<s>`.
    pub fn predictable(&self) -> impl Iterator<Item = TokenId> + '_ {
        (0..self.vocab.len() as TokenId).filter(move |&id| self.vocab[id as usize] != BOS)
    }

    pub fn entry(&self, gram: &[TokenId]) -> Option<&NGramEntry> {
        self.grams.get(gram.len().checked_sub(1)?)?.get(gram)
    }

    pub fn count(&self, k: usize) -> usize {
        self.grams[k - 1].len()
    }

    pub fn grams(&self, k: usize) -> impl Iterator<Item = (&Vec<TokenId>, &NGramEntry)> {
        self.grams[k - 1].iter()
    }

    /// Log10 `P(token | context)`; `context` is oldest-first and may be longer than `order - 1`.
    pub fn log10_prob(&self, context: &[TokenId], token: TokenId) -> f64 {
        let keep = self.order - 1;
        let ctx = &context[context.len().saturating_sub(keep)..];
        let mut backoff = 0.0;
        let mut key = Vec::with_capacity(ctx.len() + 1);
        for start in 0..=ctx.len() {
            let h = &ctx[start..];
            key.clear();
            key.extend_from_slice(h);
            key.push(token);
            if let Some(e) = self.grams[key.len() - 1].get(&key) {
                return backoff + e.log10_prob;
            }
            if !h.is_empty() {
                if let Some(bo) = self.grams[h.len() - 1].get(h).and_then(|e| e.backoff) {
                    backoff += bo;
                }
            }
        }
        BOS_LOG10_PROB
    }

    /// Trims a context to the longest suffix that can still influence scoring.
    pub fn trim_context(&self, context: &[TokenId]) -> Vec<TokenId> {
        let keep = self.order - 1;
        let mut ctx = &context[context.len().saturating_sub(keep)..];
        while !ctx.is_empty() && self.entry(ctx).is_none() {
            ctx = &ctx[1..];
        }
        ctx.to_vec()
    }

    /// Log10 probability of a whole sentence including `</s>`, starting after `<s>`.
    pub fn sentence_log10_prob(&self, tokens: &[TokenId]) -> f64 {
        let mut ctx: Vec<TokenId> = self.bos().into_iter().collect();
        let mut total = 0.0;
        for &t in tokens.iter().chain(self.eos().as_ref()) {
            total += self.log10_prob(&ctx, t);
            ctx.push(t);
        }
        total
    }

    /// Estimates an interpolated Kneser-Ney model with a single absolute discount.
    ///
    /// Sentences are wrapped in `<s>`/`</s>`; `<unk>` is always in the vocabulary.
    /// Highest-order n-grams and n-grams starting with `<s>` use raw counts, all
    /// others use continuation counts. The unigram level interpolates with the
    /// uniform distribution over every predictable token.
    pub fn train_kneser_ney<S: AsRef<str>>(sentences: &[Vec<S>], config: KneserNeyConfig) -> Result<Self> {
        let KneserNeyConfig { order, discount } = config;
        if order == 0 {
            return Err(Error::invalid("n-gram order must be at least 1"));
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(Error::invalid(format!("discount {discount} must lie in (0, 1)")));
        }
        if sentences.is_empty() {
            return Err(Error::invalid("training corpus is empty"));
        }

        let mut lm = Self {
            order,
            vocab: Vec::new(),
            ids: HashMap::new(),
            grams: vec![HashMap::new(); order],
        };
        let bos = lm.intern(BOS);
        let eos = lm.intern(EOS);
        lm.intern(UNK);
        let words: BTreeSet<&str> = sentences.iter().flatten().map(AsRef::as_ref).collect();
        for w in words {
            if w == BOS || w == EOS {
                return Err(Error::invalid(format!("corpus contains reserved token {w}")));
            }
            lm.intern(w);
        }

        // raw counts of every k-gram ending at a predicted position
        let mut raw: Vec<HashMap<Vec<TokenId>, u64>> = vec![HashMap::new(); order];
        for sentence in sentences {
            let mut ids = Vec::with_capacity(sentence.len() + 2);
            ids.push(bos);
            ids.extend(sentence.iter().map(|w| lm.ids[w.as_ref()]));
            ids.push(eos);
            for i in 1..ids.len() {
                for k in 1..=order.min(i + 1) {
                    *raw[k - 1].entry(ids[i + 1 - k..=i].to_vec()).or_default() += 1;
                }
            }
        }

        // adjusted counts
        let mut adjusted: Vec<HashMap<Vec<TokenId>, u64>> = vec![HashMap::new(); order];
        adjusted[order - 1] = raw[order - 1].clone();
        for k in (1..order).rev() {
            let mut continuation: HashMap<Vec<TokenId>, u64> = HashMap::new();
            for gram in raw[k].keys() {
                *continuation.entry(gram[1..].to_vec()).or_default() += 1;
            }
            for (gram, &c) in &raw[k - 1] {
                let a = if gram[0] == bos { c } else { continuation.get(gram).copied().unwrap_or(0) };
                if a > 0 {
                    adjusted[k - 1].insert(gram.clone(), a);
                }
            }
        }

        // unigrams: interpolate with uniform over predictable tokens
        let predictable = lm.vocab.len() - 1;
        let total: u64 = adjusted[0].iter().filter(|(g, _)| g[0] != bos).map(|(_, &c)| c).sum();
        let types = adjusted[0].keys().filter(|g| g[0] != bos).count();
        let (total, types) = (total as f64, types as f64);
        let uniform = 1.0 / predictable as f64;
        let mut probs: Vec<HashMap<Vec<TokenId>, f64>> = vec![HashMap::new(); order];
        for id in 0..lm.vocab.len() as TokenId {
            if id == bos {
                continue;
            }
            let a = adjusted[0].get(&vec![id]).copied().unwrap_or(0) as f64;
            let p = (a - discount).max(0.0) / total + discount * types / total * uniform;
            probs[0].insert(vec![id], p);
        }

        // higher orders, bottom up; backoff(h) = D * N1+(h •) / c(h)
        let mut backoffs: Vec<HashMap<Vec<TokenId>, f64>> = vec![HashMap::new(); order];
        for k in 2..=order {
            let mut context_total: HashMap<&[TokenId], (u64, u64)> = HashMap::new();
            for (gram, &a) in &adjusted[k - 1] {
                let e = context_total.entry(&gram[..k - 1]).or_default();
                e.0 += a;
                e.1 += 1;
            }
            let mut level = HashMap::with_capacity(adjusted[k - 1].len());
            for (gram, &a) in &adjusted[k - 1] {
                let (c, n1) = context_total[&gram[..k - 1]];
                let gamma = discount * n1 as f64 / c as f64;
                let lower = lm_prob_from(&probs, &backoffs, &gram[1..k - 1], gram[k - 1]);
                level.insert(gram.clone(), (a as f64 - discount) / c as f64 + gamma * lower);
            }
            for (h, (c, n1)) in context_total {
                backoffs[k - 2].insert(h.to_vec(), discount * n1 as f64 / c as f64);
            }
            probs[k - 1] = level;
        }

        for k in 1..=order {
            let mut table = HashMap::new();
            let grams: BTreeSet<&Vec<TokenId>> = probs[k - 1].keys().chain(backoffs[k - 1].keys()).collect();
            for gram in grams {
                let log10_prob = match probs[k - 1].get(gram) {
                    Some(p) => p.log10(),
                    None if k == 1 && gram[0] == bos => BOS_LOG10_PROB,
                    // a context that is never itself predicted (only <s> can be)
                    None => continue,
                };
                let backoff = backoffs[k - 1].get(gram).map(|b| b.log10());
                table.insert(gram.clone(), NGramEntry { log10_prob, backoff });
            }
            if k == 1 && !table.contains_key(&vec![bos]) {
                table.insert(
                    vec![bos],
                    NGramEntry {
                        log10_prob: BOS_LOG10_PROB,
                        backoff: None,
                    },
                );
            }
            lm.grams[k - 1] = table;
        }
        Ok(lm)
    }
}

// linear-domain backoff lookup over partially built tables
fn lm_prob_from(
    probs: &[HashMap<Vec<TokenId>, f64>],
    backoffs: &[HashMap<Vec<TokenId>, f64>],
    context: &[TokenId],
    token: TokenId,
) -> f64 {
    let mut scale = 1.0;
    for start in 0..=context.len() {
        let h = &context[start..];
        let mut key = h.to_vec();
        key.push(token);
        if let Some(p) = probs[key.len() - 1].get(&key) {
            return scale * p;
        }
        if !h.is_empty() {
            if let Some(b) = backoffs[h.len() - 1].get(h) {
                scale *= b;
            }
        }
    }
    0.0
}
