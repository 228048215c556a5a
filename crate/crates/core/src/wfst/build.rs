//! Token, lexicon and grammar transducers.

use std::collections::HashMap;

use super::fst::{Arc, Label, StateId, SymbolTable, Wfst, EPSILON};
use super::semiring::Semiring;
use crate::alphabet::{Alphabet, BLANK};
use crate::error::{Error, Result};
use crate::io::Lexicon;
use crate::lm::ngram::{NGramLm, TokenId, BOS, EOS};

/// Input table of the token transducer: `<eps>` then every alphabet symbol,
/// so alphabet index `k` has label `k + 1`.
pub fn acoustic_table(alphabet: &Alphabet) -> SymbolTable {
    SymbolTable::from_symbols(alphabet.symbols()).expect("alphabet symbols are unique")
}

/// `<eps>` then every non-blank symbol, so alphabet index `k` keeps label `k`.
pub fn unit_table(alphabet: &Alphabet) -> SymbolTable {
    SymbolTable::from_symbols(&alphabet.symbols()[1..]).expect("alphabet symbols are unique")
}

/// Maps any path over the blank-augmented alphabet to its squash image.
///
/// State 0 means "after blank or at the start"; state `k` means "inside a run of label `k`".
pub fn build_token_fst<W: Semiring>(alphabet: &Alphabet) -> Wfst<W> {
    let mut fst = Wfst::new(acoustic_table(alphabet), unit_table(alphabet));
    let k = alphabet.len();
    for _ in 0..k {
        let s = fst.add_state();
        fst.set_final(s, W::one());
    }
    fst.set_start(0);
    let input = |label: usize| (label + 1) as Label;
    for from in 0..k {
        fst.add_arc(from as StateId, Arc::new(input(BLANK), EPSILON, W::one(), 0))
            .expect("valid token arc");
        for label in 1..k {
            let out = if label == from { EPSILON } else { label as Label };
            fst.add_arc(from as StateId, Arc::new(input(label), out, W::one(), label as StateId))
                .expect("valid token arc");
        }
    }
    fst
}

/// Closure over per-word unit chains. The word is emitted on the first unit.
///
/// When `words` is given, the output side uses that table and words missing
/// from it map to `<unk>` (or fail if the table has none). If the alphabet has
/// a space symbol that no entry uses, it is accepted between words with no output.
pub fn build_lexicon_fst<W: Semiring>(
    lexicon: &Lexicon,
    alphabet: &Alphabet,
    words: Option<&SymbolTable>,
) -> Result<Wfst<W>> {
    if lexicon.is_empty() {
        return Err(Error::Build("lexicon is empty".into()));
    }
    lexicon.validate(alphabet)?;
    let osyms = match words {
        Some(t) => t.clone(),
        None => {
            let mut t = SymbolTable::new();
            for e in &lexicon.entries {
                t.add(&e.word);
            }
            t
        }
    };
    let mut fst = Wfst::new(unit_table(alphabet), osyms);
    let root = fst.add_state();
    fst.set_start(root);
    fst.set_final(root, W::one());
    for e in &lexicon.entries {
        let word = match fst.output_symbols().label(&e.word) {
            Some(l) => l,
            None => fst.output_symbols().label(crate::lm::ngram::UNK).ok_or_else(|| {
                Error::Build(format!("word {:?} is missing from the word table", e.word))
            })?,
        };
        let mut s = root;
        for (i, unit) in e.units.iter().enumerate() {
            let label = alphabet.index_of(unit).expect("validated") as Label;
            let next = if i + 1 == e.units.len() { root } else { fst.add_state() };
            let out = if i == 0 { word } else { EPSILON };
            fst.add_arc(s, Arc::new(label, out, W::one(), next))?;
            s = next;
        }
    }
    if let Some(sp) = alphabet.space_index() {
        let used = lexicon.entries.iter().any(|e| e.units.iter().any(|u| alphabet.index_of(u) == Some(sp)));
        if !used {
            fst.add_arc(root, Arc::new(sp as Label, EPSILON, W::one(), root))?;
        }
    }
    Ok(fst)
}

/// Word table for a grammar: every model token except `<s>` and `</s>`, sorted.
pub fn grammar_table(lm: &NGramLm) -> SymbolTable {
    let mut words: Vec<&str> = lm
        .vocab()
        .iter()
        .map(String::as_str)
        .filter(|w| *w != BOS && *w != EOS)
        .collect();
    words.sort_unstable();
    SymbolTable::from_symbols(words).expect("vocabulary is unique")
}

fn cost_of<W: Semiring>(log10: f64) -> W {
    W::from_value(-log10 * std::f64::consts::LN_10)
}

/// Backoff n-gram acceptor: one state per history, word arcs weighted by
/// n-gram costs, epsilon arcs weighted by backoff costs, and `</s>` as final weight.
pub fn build_grammar_fst<W: Semiring>(lm: &NGramLm) -> Result<Wfst<W>> {
    let table = grammar_table(lm);
    if table.is_empty() {
        return Err(Error::Build("language model has no words".into()));
    }
    let bos = lm.bos();
    let eos = lm.eos();
    let order = lm.order();

    let mut fst = Wfst::new(table.clone(), table.clone());
    let mut states: HashMap<Vec<TokenId>, StateId> = HashMap::new();
    states.insert(Vec::new(), fst.add_state());
    let mut histories: Vec<Vec<TokenId>> = Vec::new();
    for k in 1..order {
        let mut level: Vec<Vec<TokenId>> = lm
            .grams(k)
            .map(|(g, _)| g.clone())
            .filter(|g| !g.iter().any(|t| Some(*t) == eos) && !g[1..].iter().any(|t| Some(*t) == bos))
            .collect();
        level.sort_unstable();
        histories.extend(level);
    }
    for h in &histories {
        let s = fst.add_state();
        states.insert(h.clone(), s);
    }
    let longest_state = |ctx: &[TokenId]| -> StateId {
        let mut c = &ctx[ctx.len().saturating_sub(order - 1)..];
        loop {
            if let Some(&s) = states.get(c) {
                return s;
            }
            c = &c[1..];
        }
    };
    let start = match bos {
        Some(b) if order > 1 => longest_state(&[b]),
        _ => states[&Vec::new()],
    };
    fst.set_start(start);

    let word_label = |id: TokenId| table.label(lm.token(id));
    for k in 1..=order {
        let mut grams: Vec<(&Vec<TokenId>, f64)> = lm.grams(k).map(|(g, e)| (g, e.log10_prob)).collect();
        grams.sort_unstable_by(|a, b| a.0.cmp(b.0));
        for (gram, log10) in grams {
            let (h, w) = (&gram[..k - 1], gram[k - 1]);
            if Some(w) == bos {
                continue;
            }
            let Some(&from) = states.get(h) else {
                if h.iter().any(|t| Some(*t) == eos) {
                    continue;
                }
                return Err(Error::Build(format!(
                    "{k}-gram {:?} has no history entry",
                    gram.iter().map(|&t| lm.token(t)).collect::<Vec<_>>()
                )));
            };
            if Some(w) == eos {
                fst.set_final(from, cost_of(log10));
                continue;
            }
            let Some(label) = word_label(w) else { continue };
            let mut next = h.to_vec();
            next.push(w);
            let to = longest_state(&next);
            fst.add_arc(from, Arc::new(label, label, cost_of(log10), to))?;
        }
    }
    for h in &histories {
        let from = states[h];
        let backoff = lm.entry(h).and_then(|e| e.backoff).unwrap_or(0.0);
        let to = longest_state(&h[1..]);
        fst.add_arc(from, Arc::new(EPSILON, EPSILON, cost_of(backoff), to))?;
    }
    Ok(fst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{Lexicon, LexiconEntry};
    use crate::lm::arpa::parse_arpa;
    use crate::path::squash_labels;
    use crate::wfst::compose::compose;
    use crate::wfst::semiring::TropicalWeight;
    use proptest::prelude::*;

    type W = TropicalWeight<f64>;

    fn outputs(fst: &Wfst<W>, input: &[Label]) -> Vec<Vec<Label>> {
        let mut v: Vec<Vec<Label>> = fst.transduce(input).into_keys().collect();
        v.sort();
        v
    }

    #[test]
    fn token_fst_squashes() {
        let alpha = Alphabet::from_chars("ab").unwrap();
        let t: Wfst<W> = build_token_fst(&alpha);
        let (blk, a, b) = (1, 2, 3);
        assert_eq!(outputs(&t, &[a, a, blk, b]), vec![vec![1, 2]]);
        assert_eq!(outputs(&t, &[blk, blk]), vec![Vec::<Label>::new()]);
        assert_eq!(outputs(&t, &[a, blk, a]), vec![vec![1, 1]]);
    }

    #[test]
    fn lexicon_single_entry_and_homophones() {
        let alpha = Alphabet::new(["<blk>", "c", "a", "t", "uw"]).unwrap();
        let lex = Lexicon::spelled(["cat"]);
        let l: Wfst<W> = build_lexicon_fst(&lex, &alpha, None).unwrap();
        let cat = l.output_symbols().label("cat").unwrap();
        assert_eq!(outputs(&l, &[1, 2, 3]), vec![vec![cat]]);

        let lex = Lexicon::new(vec![
            LexiconEntry { word: "to".into(), units: vec!["t".into(), "uw".into()] },
            LexiconEntry { word: "two".into(), units: vec!["t".into(), "uw".into()] },
        ]);
        let l: Wfst<W> = build_lexicon_fst(&lex, &alpha, None).unwrap();
        let got: Vec<Vec<&str>> = outputs(&l, &[3, 4])
            .iter()
            .map(|o| o.iter().map(|&w| l.output_symbols().symbol(w).unwrap()).collect())
            .collect();
        assert_eq!(got, vec![vec!["to"], vec!["two"]]);
    }

    #[test]
    fn lexicon_errors() {
        let alpha = Alphabet::from_chars("ab").unwrap();
        let err = build_lexicon_fst::<W>(&Lexicon::default(), &alpha, None).unwrap_err();
        assert!(matches!(err, Error::Build(_)));
        let err = build_lexicon_fst::<W>(&Lexicon::spelled(["abc"]), &alpha, None).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("\"abc\"") && msg.contains("\"c\""), "{msg}");
    }

    const UNIGRAM: &str = "\\data\\
ngram 1=5

\\1-grams:
-0.5\t</s>
-99\t<s>
-0.4\ta
-0.7\tb
-1.0\tc

\\end\\
";

    #[test]
    fn unigram_grammar_weights() {
        let lm = parse_arpa(UNIGRAM).unwrap();
        let g: Wfst<W> = build_grammar_fst(&lm).unwrap();
        assert_eq!(g.num_states(), 1);
        let t = g.input_symbols();
        let (a, b) = (t.label("a").unwrap(), t.label("b").unwrap());
        let w = g.transduce(&[a, b])[&vec![a, b]];
        let expected = (0.4 + 0.7 + 0.5) * std::f64::consts::LN_10;
        assert!((w.0 - expected).abs() < 1e-12);
    }

    const BIGRAM: &str = "\\data\\
ngram 1=4
ngram 2=3

\\1-grams:
-0.5\t</s>
-99\t<s>\t-0.2
-0.4\ta\t-0.3
-0.7\tb\t-0.1

\\2-grams:
-0.3\t<s> a
-0.05\ta b
-0.2\tb </s>

\\end\\
";

    #[test]
    fn bigram_uses_direct_arc() {
        let lm = parse_arpa(BIGRAM).unwrap();
        let g: Wfst<W> = build_grammar_fst(&lm).unwrap();
        let t = g.input_symbols();
        let (a, b) = (t.label("a").unwrap(), t.label("b").unwrap());
        let best = |input: &[Label]| {
            g.transduce(input)
                .into_values()
                .fold(W::zero(), |acc, w| acc.plus(w))
                .0
        };
        let ln10 = std::f64::consts::LN_10;
        // <s> a b </s> through stored bigrams only
        assert!((best(&[a, b]) - (0.3 + 0.05 + 0.2) * ln10).abs() < 1e-12);
        // without "a b" the path backs off: bo(a) + P(b)
        let lm2 = parse_arpa(&BIGRAM.replace("ngram 2=3", "ngram 2=2").replace("-0.05\ta b\n", "")).unwrap();
        let g2: Wfst<W> = build_grammar_fst(&lm2).unwrap();
        let w2 = g2
            .transduce(&[a, b])
            .into_values()
            .fold(W::zero(), |acc, w| acc.plus(w))
            .0;
        assert!((w2 - (0.3 + 0.3 + 0.7 + 0.2) * ln10).abs() < 1e-12);
        assert!(w2 > best(&[a, b]));
    }

    #[test]
    fn empty_model_is_rejected() {
        let text = "\\data\\\nngram 1=2\n\n\\1-grams:\n-99\t<s>\n0\t</s>\n\n\\end\\\n";
        let lm = parse_arpa(text).unwrap();
        assert!(matches!(build_grammar_fst::<W>(&lm), Err(Error::Build(_))));
    }

    #[test]
    fn token_lexicon_composition() {
        let alpha = Alphabet::from_chars("ab").unwrap();
        let t: Wfst<W> = build_token_fst(&alpha);
        let lex = Lexicon::new(vec![LexiconEntry { word: "AB".into(), units: vec!["a".into(), "b".into()] }]);
        let l: Wfst<W> = build_lexicon_fst(&lex, &alpha, None).unwrap();
        let tl = compose(&t, &l).unwrap();
        let ab = tl.output_symbols().label("AB").unwrap();
        assert_eq!(outputs(&tl, &[2, 2, 1, 3]), vec![vec![ab]]);
        assert!(outputs(&tl, &[2, 1, 2]).is_empty());
    }

    proptest! {
        #[test]
        fn token_fst_matches_squash(path in proptest::collection::vec(0usize..4, 0..9)) {
            let alpha = Alphabet::from_chars("abc").unwrap();
            let t: Wfst<W> = build_token_fst(&alpha);
            let input: Vec<Label> = path.iter().map(|&k| k as Label + 1).collect();
            let expected: Vec<Label> = squash_labels(&path).into_iter().map(|k| k as Label).collect();
            prop_assert_eq!(outputs(&t, &input), vec![expected]);
        }
    }
}
