//! Enumeration oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::LN_10;

use ctc_core::io::Lexicon;
use ctc_core::lm::ngram::{NGramLm, TokenId};
use ctc_core::oracle::best_alignment_score;
use ctc_core::{Alphabet, PosteriorMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Rows drawn uniformly from `[0.05, 1)` and normalized.
pub fn random_post(rng: &mut ChaCha8Rng, frames: usize, labels: usize) -> PosteriorMatrix<f64> {
    let rows: Vec<Vec<f64>> = (0..frames)
        .map(|_| {
            let raw: Vec<f64> = (0..labels).map(|_| rng.gen_range(0.05..1.0)).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / s).collect()
        })
        .collect();
    PosteriorMatrix::from_probs(&rows).unwrap()
}

/// Like [`random_post`] but with a few sharply peaked rows, so the argmax is not uniform noise.
pub fn peaky_post(rng: &mut ChaCha8Rng, frames: usize, labels: usize) -> PosteriorMatrix<f64> {
    let rows: Vec<Vec<f64>> = (0..frames)
        .map(|_| {
            let mut raw: Vec<f64> = (0..labels).map(|_| rng.gen_range(0.0..1.0f64).powi(3) + 1e-3).collect();
            if rng.gen_bool(0.5) {
                let k = rng.gen_range(0..labels);
                raw[k] += 3.0;
            }
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / s).collect()
        })
        .collect();
    PosteriorMatrix::from_probs(&rows).unwrap()
}

/// Cheapest way (natural-log cost) for a backoff acceptor to read `<s> words </s>`,
/// taking the minimum over every choice of following a stored n-gram or backing off.
pub fn grammar_min_cost(lm: &NGramLm, words: &[TokenId]) -> f64 {
    let mut frontier: BTreeMap<Vec<TokenId>, f64> = BTreeMap::new();
    frontier.insert(lm.trim_context(&[lm.bos().unwrap()]), 0.0);
    let eos = lm.eos().unwrap();
    for (i, &w) in words.iter().chain([eos].iter()).enumerate() {
        let last = i == words.len();
        let mut next: BTreeMap<Vec<TokenId>, f64> = BTreeMap::new();
        for (h, &c) in &frontier {
            let mut cur = h.clone();
            let mut acc = c;
            loop {
                let mut gram = cur.clone();
                gram.push(w);
                if let Some(e) = lm.entry(&gram) {
                    let key = if last { Vec::new() } else { lm.trim_context(&gram) };
                    let cost = acc - e.log10_prob * LN_10;
                    let slot = next.entry(key).or_insert(f64::INFINITY);
                    *slot = slot.min(cost);
                }
                if cur.is_empty() {
                    break;
                }
                acc -= lm.entry(&cur).and_then(|e| e.backoff).unwrap_or(0.0) * LN_10;
                cur = lm.trim_context(&cur[1..]);
            }
        }
        frontier = next;
    }
    frontier.values().copied().fold(f64::INFINITY, f64::min)
}

/// All sequences of lexicon entry indices with `1..=max_words` entries, plus the empty one.
pub fn entry_sequences(entries: usize, max_words: usize) -> Vec<Vec<usize>> {
    let mut all = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_words {
        frontier = frontier
            .iter()
            .flat_map(|s: &Vec<usize>| {
                (0..entries).map(move |i| {
                    let mut v = s.clone();
                    v.push(i);
                    v
                })
            })
            .collect();
        all.extend(frontier.iter().cloned());
    }
    all
}

/// Brute-force best word sequence: every sequence of at most `max_words`
/// lexicon entries, scored as its best alignment under `score` plus the
/// minimum grammar cost. Returns (cost, words).
pub fn wfst_brute_force(
    frames: usize,
    score: impl Fn(usize, usize) -> f64,
    alphabet: &Alphabet,
    lexicon: &Lexicon,
    lm: &NGramLm,
    max_words: usize,
) -> (f64, Vec<String>) {
    let mut best = (f64::INFINITY, Vec::new());
    for seq in entry_sequences(lexicon.entries.len(), max_words) {
        let units: Vec<usize> = seq
            .iter()
            .flat_map(|&i| lexicon.entries[i].units.iter().map(|u| alphabet.index_of(u).unwrap()))
            .collect();
        if units.len() > frames {
            continue;
        }
        let align = best_alignment_score(&units, frames, &score);
        let ids: Vec<TokenId> = seq.iter().map(|&i| lm.id_or_unk(&lexicon.entries[i].word).unwrap()).collect();
        let cost = -align + grammar_min_cost(lm, &ids);
        if cost < best.0 - 1e-9 {
            best = (cost, seq.iter().map(|&i| lexicon.entries[i].word.clone()).collect());
        }
    }
    best
}

/// Levenshtein distance by the textbook prefix recurrence.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = (prev[j] + usize::from(x != y)).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

/// Every sequence of length at most `max_len` over `tokens`, shortest first.
pub fn all_sequences<'a>(tokens: &[&'a str], max_len: usize) -> Vec<Vec<&'a str>> {
    let mut out = vec![vec![]];
    let mut layer: Vec<Vec<&str>> = vec![vec![]];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|s| tokens.iter().map(move |t| [s.as_slice(), &[*t]].concat()))
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

/// Checks that an alignment is a consistent edit script between the two sides.
pub fn check_alignment(reference: &[&str], hypothesis: &[&str], report: &ctc_core::score::AlignmentReport) {
    use ctc_core::score::EditOp;
    let r: Vec<&str> = report.pairs.iter().filter_map(|p| p.reference.as_deref()).collect();
    let h: Vec<&str> = report.pairs.iter().filter_map(|p| p.hypothesis.as_deref()).collect();
    assert_eq!(r, reference);
    assert_eq!(h, hypothesis);
    for p in &report.pairs {
        let expected = match (&p.reference, &p.hypothesis) {
            (Some(a), Some(b)) if a == b => EditOp::Correct,
            (Some(_), Some(_)) => EditOp::Substitution,
            (Some(_), None) => EditOp::Deletion,
            (None, Some(_)) => EditOp::Insertion,
            (None, None) => panic!("empty aligned pair"),
        };
        assert_eq!(p.op, expected);
    }
    assert_eq!(report.n, reference.len());
    assert_eq!(report.correct + report.substitutions + report.deletions, reference.len());
    assert_eq!(report.correct + report.substitutions + report.insertions, hypothesis.len());
}
