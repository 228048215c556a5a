//! Time-synchronous Viterbi search over a composed decoding graph.

use std::collections::{HashMap, VecDeque};

use super::build::{build_grammar_fst, build_lexicon_fst, build_token_fst, grammar_table};
use super::compose::compose;
use super::fst::{Label, StateId, Wfst, EPSILON};
use super::semiring::{Semiring, TropicalWeight};
use crate::alphabet::Alphabet;
use crate::error::{Error, Result};
use crate::float::LogFloat;
use crate::io::Lexicon;
use crate::lm::ngram::NGramLm;
use crate::posterior::{apply_prior_scaling, PosteriorMatrix, PriorVector, ScoreMatrix};

/// Default cap on simultaneously active graph states.
pub const DEFAULT_MAX_ACTIVE: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct WfstConfig {
    /// Histogram pruning: keep at most this many states per frame. `None` keeps all.
    pub max_active: Option<usize>,
    pub acoustic_scale: f64,
    /// Cost added for every emitted word.
    pub word_insertion_penalty: f64,
}

impl Default for WfstConfig {
    fn default() -> Self {
        Self {
            max_active: Some(DEFAULT_MAX_ACTIVE),
            acoustic_scale: 1.0,
            word_insertion_penalty: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecodeStatus {
    Complete,
    /// Tokens survived but none ended in a final state; the best partial output is returned.
    NoFinalState,
    /// Every token was pruned or reached an impossible score; the output is empty.
    NoSurvivors,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WfstOutput {
    pub words: Vec<String>,
    pub olabels: Vec<Label>,
    /// Total path cost including the final weight (`+inf` when nothing survived).
    pub cost: f64,
    pub status: DecodeStatus,
}

/// `T ∘ (L ∘ G)` for an alphabet, lexicon and word n-gram model.
pub fn build_decoding_graph(
    alphabet: &Alphabet,
    lexicon: &Lexicon,
    lm: &NGramLm,
) -> Result<Wfst<TropicalWeight<f64>>> {
    let g = build_grammar_fst(lm)?;
    let words = grammar_table(lm);
    let l = build_lexicon_fst(lexicon, alphabet, Some(&words))?;
    let lg = compose(&l, &g)?;
    let t = build_token_fst(alphabet);
    compose(&t, &lg)
}

/// Prior-scales the posteriors and decodes them.
pub fn wfst_decode<F: LogFloat>(
    post: &PosteriorMatrix<F>,
    prior: &PriorVector<F>,
    graph: &Wfst<TropicalWeight<f64>>,
    cfg: &WfstConfig,
) -> Result<WfstOutput> {
    let scores = apply_prior_scaling(post, prior)?;
    decode_scores(&scores, graph, cfg)
}

const NO_TRACE: u32 = u32::MAX;

/// Output labels as a shared-prefix tree; tokens hold an index into it.
#[derive(Default)]
struct Traces {
    nodes: Vec<(u32, Label)>,
}

impl Traces {
    fn push(&mut self, parent: u32, label: Label) -> u32 {
        self.nodes.push((parent, label));
        (self.nodes.len() - 1) as u32
    }

    fn labels(&self, mut at: u32) -> Vec<Label> {
        let mut out = Vec::new();
        while at != NO_TRACE {
            let (parent, label) = self.nodes[at as usize];
            out.push(label);
            at = parent;
        }
        out.reverse();
        out
    }
}

#[derive(Clone, Copy)]
struct Token {
    cost: f64,
    trace: u32,
}

type Active = HashMap<StateId, Token>;

fn relax(active: &mut Active, state: StateId, token: Token) -> bool {
    match active.get_mut(&state) {
        Some(t) if t.cost <= token.cost => false,
        Some(t) => {
            *t = token;
            true
        }
        None => {
            active.insert(state, token);
            true
        }
    }
}

fn sorted_states(active: &Active) -> Vec<StateId> {
    let mut v: Vec<StateId> = active.keys().copied().collect();
    v.sort_unstable();
    v
}

/// Follows epsilon-input arcs until no token improves. Backoff weights can be
/// negative costs, so this is a label-correcting search rather than Dijkstra;
/// the relaxation count is bounded in case the graph has a negative epsilon cycle.
fn epsilon_closure(
    graph: &Wfst<TropicalWeight<f64>>,
    active: &mut Active,
    traces: &mut Traces,
    cfg: &WfstConfig,
) -> Result<()> {
    let mut queue: VecDeque<StateId> = sorted_states(active).into();
    let limit = (graph.num_states() as u64 + 1) * (graph.num_arcs() as u64 + 1);
    let mut steps = 0u64;
    while let Some(s) = queue.pop_front() {
        let tok = active[&s];
        for arc in graph.arcs(s).iter().filter(|a| a.ilabel == EPSILON) {
            steps += 1;
            if steps > limit {
                return Err(Error::Unsupported(
                    "decoding graph has a negative-cost epsilon cycle".into(),
                ));
            }
            let mut cost = tok.cost + arc.weight.value();
            if arc.olabel != EPSILON {
                cost += cfg.word_insertion_penalty;
            }
            if !cost.is_finite() || active.get(&arc.next).is_some_and(|t| t.cost <= cost) {
                continue;
            }
            let trace = if arc.olabel == EPSILON { tok.trace } else { traces.push(tok.trace, arc.olabel) };
            relax(active, arc.next, Token { cost, trace });
            queue.push_back(arc.next);
        }
    }
    Ok(())
}

fn prune(active: &mut Active, max_active: Option<usize>) {
    let Some(n) = max_active else { return };
    if active.len() <= n {
        return;
    }
    let mut v: Vec<(StateId, Token)> = active.drain().collect();
    v.sort_unstable_by(|a, b| a.1.cost.total_cmp(&b.1.cost).then(a.0.cmp(&b.0)));
    v.truncate(n);
    active.extend(v);
}

/// Decodes an arbitrary score matrix (natural-log scores, higher is better).
///
/// Graph input label `k + 1` consumes score column `k`.
pub fn decode_scores<F: LogFloat>(
    scores: &ScoreMatrix<F>,
    graph: &Wfst<TropicalWeight<f64>>,
    cfg: &WfstConfig,
) -> Result<WfstOutput> {
    if cfg.max_active == Some(0) {
        return Err(Error::Config("max active states must be at least 1".into()));
    }
    if !(cfg.acoustic_scale.is_finite() && cfg.acoustic_scale > 0.0) {
        return Err(Error::Config("acoustic scale must be positive".into()));
    }
    if !cfg.word_insertion_penalty.is_finite() {
        return Err(Error::Config("word insertion penalty must be finite".into()));
    }
    if graph.input_symbols().len() != scores.labels() + 1 {
        return Err(Error::invalid(format!(
            "graph has {} input labels but the posteriors have {}",
            graph.input_symbols().len() - 1,
            scores.labels()
        )));
    }
    let mut traces = Traces::default();
    let mut active = Active::new();
    if let Some(start) = graph.start() {
        active.insert(start, Token { cost: 0.0, trace: NO_TRACE });
        epsilon_closure(graph, &mut active, &mut traces, cfg)?;
        prune(&mut active, cfg.max_active);
    }
    for t in 0..scores.frames() {
        if active.is_empty() {
            break;
        }
        let row = scores.row(t);
        let mut next = Active::with_capacity(active.len() * 2);
        for s in sorted_states(&active) {
            let tok = active[&s];
            for arc in graph.arcs(s) {
                if arc.ilabel == EPSILON {
                    continue;
                }
                let acoustic = row[arc.ilabel as usize - 1].as_f64();
                let mut cost = tok.cost - cfg.acoustic_scale * acoustic + arc.weight.value();
                if arc.olabel != EPSILON {
                    cost += cfg.word_insertion_penalty;
                }
                if !cost.is_finite() || next.get(&arc.next).is_some_and(|t| t.cost <= cost) {
                    continue;
                }
                let trace = if arc.olabel == EPSILON { tok.trace } else { traces.push(tok.trace, arc.olabel) };
                relax(&mut next, arc.next, Token { cost, trace });
            }
        }
        epsilon_closure(graph, &mut next, &mut traces, cfg)?;
        prune(&mut next, cfg.max_active);
        active = next;
    }

    let pick = |final_only: bool| {
        sorted_states(&active)
            .into_iter()
            .filter_map(|s| {
                let tok = active[&s];
                let cost = if final_only { tok.cost + graph.final_weight(s).value() } else { tok.cost };
                cost.is_finite().then_some((cost, s, tok.trace))
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
    };
    let (best, status) = match pick(true) {
        Some(b) => (Some(b), DecodeStatus::Complete),
        None => match pick(false) {
            Some(b) => (Some(b), DecodeStatus::NoFinalState),
            None => (None, DecodeStatus::NoSurvivors),
        },
    };
    if status != DecodeStatus::Complete {
        log::warn!("wfst decode ended with status {status:?}");
    }
    let Some((cost, _, trace)) = best else {
        return Ok(WfstOutput { words: Vec::new(), olabels: Vec::new(), cost: f64::INFINITY, status });
    };
    let olabels = traces.labels(trace);
    let words = olabels
        .iter()
        .map(|&l| graph.output_symbols().symbol(l).unwrap_or("<?>").to_string())
        .collect();
    Ok(WfstOutput { words, olabels, cost, status })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{Lexicon, LexiconEntry};
    use crate::lm::arpa::parse_arpa;
    use crate::lm::wordlm::train_word_ngram;
    use crate::oracle::best_alignment_score;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const UNIFORM: &str = "\\data\\
ngram 1=4

\\1-grams:
-0.4771213\t</s>
-99\t<s>
-0.4771213\tA
-0.4771213\tAB

\\end\\
";

    fn toy() -> (Alphabet, Lexicon, NGramLm) {
        let alpha = Alphabet::from_chars("ab").unwrap();
        let lex = Lexicon::new(vec![
            LexiconEntry { word: "AB".into(), units: vec!["a".into(), "b".into()] },
            LexiconEntry { word: "A".into(), units: vec!["a".into()] },
        ]);
        (alpha, lex, parse_arpa(UNIFORM).unwrap())
    }

    fn random_post(rng: &mut ChaCha8Rng, frames: usize, labels: usize) -> PosteriorMatrix<f64> {
        let rows: Vec<Vec<f64>> = (0..frames)
            .map(|_| {
                let raw: Vec<f64> = (0..labels).map(|_| rng.gen_range(0.05..1.0)).collect();
                let s: f64 = raw.iter().sum();
                raw.into_iter().map(|x| x / s).collect()
            })
            .collect();
        PosteriorMatrix::from_probs(&rows).unwrap()
    }

    /// Best (cost, words) over all word sequences of at most `max_words`, each
    /// scored as best alignment of its spelling plus the LM sentence cost.
    fn brute_force(
        post: &PosteriorMatrix<f64>,
        alpha: &Alphabet,
        lex: &Lexicon,
        lm: &NGramLm,
        max_words: usize,
    ) -> (f64, Vec<String>) {
        let mut best = (f64::INFINITY, Vec::new());
        let mut seqs: Vec<Vec<usize>> = vec![vec![]];
        let mut frontier = seqs.clone();
        for _ in 0..max_words {
            frontier = frontier
                .iter()
                .flat_map(|s| (0..lex.entries.len()).map(move |i| [s.clone(), vec![i]].concat()))
                .collect();
            seqs.extend(frontier.iter().cloned());
        }
        for seq in seqs {
            let units: Vec<usize> = seq
                .iter()
                .flat_map(|&i| lex.entries[i].units.iter().map(|u| alpha.index_of(u).unwrap()))
                .collect();
            let align = best_alignment_score(&units, post.frames(), |t, k| post.get(t, k));
            let ids: Vec<_> = seq.iter().map(|&i| lm.id(&lex.entries[i].word).unwrap()).collect();
            let cost = -align - lm.sentence_log10_prob(&ids) * std::f64::consts::LN_10;
            let words: Vec<String> = seq.iter().map(|&i| lex.entries[i].word.clone()).collect();
            if cost < best.0 - 1e-9 {
                best = (cost, words);
            }
        }
        best
    }

    #[test]
    fn toy_matches_enumeration() {
        let (alpha, lex, lm) = toy();
        let graph = build_decoding_graph(&alpha, &lex, &lm).unwrap();
        let cfg = WfstConfig { max_active: None, ..WfstConfig::default() };
        let uniform = PriorVector::uniform(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let post = random_post(&mut rng, 4, 3);
            let out = wfst_decode(&post, &uniform, &graph, &cfg).unwrap();
            // four frames fit at most two words; the uniform prior adds ln 3 per frame
            let (cost, words) = brute_force(&post, &alpha, &lex, &lm, 2);
            let expected = cost - 4.0 * 3f64.ln();
            assert!((out.cost - expected).abs() < 1e-9, "{} vs {expected}", out.cost);
            assert_eq!(out.words, words);
            assert_eq!(out.status, DecodeStatus::Complete);
        }
    }

    #[test]
    fn single_word_reduces_to_best_alignment() {
        let alpha = Alphabet::from_chars("ab").unwrap();
        let lex = Lexicon::spelled(["abba"]);
        let lm = train_word_ngram(&["abba"], 1, 0.75).unwrap();
        let graph = build_decoding_graph(&alpha, &lex, &lm).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let post = random_post(&mut rng, 8, 3);
        let uniform = PriorVector::uniform(3).unwrap();
        let cfg = WfstConfig { max_active: None, ..WfstConfig::default() };
        let out = wfst_decode(&post, &uniform, &graph, &cfg).unwrap();
        let units = alpha.encode_chars("abba").unwrap();
        let align = best_alignment_score(&units, 8, |t, k| post.get(t, k) - uniform.log_probs()[k]);
        let ln10 = std::f64::consts::LN_10;
        let id = lm.id("abba").unwrap();
        let lm_cost = -(lm.sentence_log10_prob(&[id])) * ln10;
        // the one-word path is the only complete one unless repeating the word is cheaper
        assert!(out.cost <= -align + lm_cost + 1e-9);
        if out.words == ["abba"] {
            assert!((out.cost - (-align + lm_cost)).abs() < 1e-9);
        }
    }

    #[test]
    fn one_hot_with_width_one() {
        // no word is a prefix of another, so a width of one never has to guess
        let alpha = Alphabet::from_chars("ab").unwrap();
        let lex = Lexicon::spelled(["ab", "b"]);
        let lm = train_word_ngram(&["ab b"], 1, 0.75).unwrap();
        let graph = build_decoding_graph(&alpha, &lex, &lm).unwrap();
        // a a - b - b
        let rows = [
            [0.0, 1.0, 0.0],
            [0.0, 1.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0],
            [1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0],
        ];
        let post = PosteriorMatrix::<f64>::from_probs(&rows).unwrap();
        let cfg = WfstConfig { max_active: Some(1), ..WfstConfig::default() };
        let out = wfst_decode(&post, &PriorVector::uniform(3).unwrap(), &graph, &cfg).unwrap();
        assert_eq!(out.words, ["ab", "b"]);
        assert_eq!(out.status, DecodeStatus::Complete);
    }

    #[test]
    fn impossible_input_reports_no_survivors() {
        let alpha = Alphabet::from_chars("ab").unwrap();
        let lex = Lexicon::spelled(["a"]);
        let lm = train_word_ngram(&["a"], 1, 0.75).unwrap();
        let graph = build_decoding_graph(&alpha, &lex, &lm).unwrap();
        // only "b" has mass, and no word uses it
        let post = PosteriorMatrix::<f64>::from_probs(&[[0.0, 0.0, 1.0]]).unwrap();
        let out = wfst_decode(&post, &PriorVector::uniform(3).unwrap(), &graph, &WfstConfig::default()).unwrap();
        assert_eq!(out.status, DecodeStatus::NoSurvivors);
        assert!(out.words.is_empty());
    }

    #[test]
    fn wider_search_is_never_worse() {
        let alpha = Alphabet::from_chars("abc").unwrap();
        let lex = Lexicon::spelled(["a", "ab", "ca", "b", "cab", "bc"]);
        let lm = train_word_ngram(&["a ab", "ab ca b", "ca a bc", "b ab ab cab"], 3, 0.75).unwrap();
        let graph = build_decoding_graph(&alpha, &lex, &lm).unwrap();
        let uniform = PriorVector::uniform(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let post = random_post(&mut rng, 10, 4);
            let full = wfst_decode(&post, &uniform, &graph, &WfstConfig { max_active: None, ..Default::default() })
                .unwrap();
            let mut prev = f64::INFINITY;
            for n in [1, 2, 4, 8, 16, 64] {
                let out = wfst_decode(&post, &uniform, &graph, &WfstConfig { max_active: Some(n), ..Default::default() })
                    .unwrap();
                if out.status == DecodeStatus::Complete {
                    assert!(full.cost <= out.cost + 1e-9, "{n}: {full:?} {out:?}");
                    // histogram pruning does not guarantee this in general; it holds on these instances
                    assert!(out.cost <= prev + 1e-9, "{n}: {} after {prev}", out.cost);
                    prev = out.cost;
                }
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        let (alpha, lex, lm) = toy();
        let graph = build_decoding_graph(&alpha, &lex, &lm).unwrap();
        let post = PosteriorMatrix::<f64>::from_probs(&[[0.5, 0.5]]).unwrap();
        let err = wfst_decode(&post, &PriorVector::uniform(2).unwrap(), &graph, &WfstConfig::default());
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }
}
