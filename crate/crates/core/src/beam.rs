//! Prefix beam search with character-LM fusion, an insertion bonus and
//! optional LM-driven space insertion.
//!
//! Each prefix keeps the log mass of its paths that end in blank and of those
//! that end in its last acoustic label. A hypothesis is ranked by
//! `logsumexp(p_blank, p_nonblank) + lm_weight * lm_log + emissions * ln(b)`:
//! blanks and collapsed repeats are LM-neutral, and every LM-scored character
//! (including inserted spaces) earns the bonus once.

use std::cmp::Ordering;
use std::collections::HashMap;

use crate::alphabet::{Alphabet, BLANK};
use crate::error::{Error, Result};
use crate::float::{log_add, LogFloat};
use crate::lm::charlm::CharLm;
use crate::path::Transcription;
use crate::posterior::PosteriorMatrix;

/// Default insertion bonus; about 1.32 bits per character.
pub const DEFAULT_INSERTION_BONUS: f64 = 2.5;
pub const DEFAULT_BEAM_WIDTH: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct BeamConfig {
    pub beam_width: usize,
    /// Multiplicative reward `b` per LM-scored character.
    pub insertion_bonus: f64,
    pub lm_weight: f64,
    /// Propose a space-appended copy of every hypothesis after each frame.
    pub space_insertion: bool,
    /// Hypotheses scoring below this are dropped before the width cut.
    pub score_floor: f64,
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self {
            beam_width: DEFAULT_BEAM_WIDTH,
            insertion_bonus: DEFAULT_INSERTION_BONUS,
            lm_weight: 1.0,
            space_insertion: false,
            score_floor: f64::NEG_INFINITY,
        }
    }
}

impl BeamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beam_width == 0 {
            return Err(Error::Config("beam width must be at least 1".into()));
        }
        if !(self.insertion_bonus.is_finite() && self.insertion_bonus > 0.0) {
            return Err(Error::Config(format!(
                "insertion bonus must be positive, got {}",
                self.insertion_bonus
            )));
        }
        if !(self.lm_weight.is_finite() && self.lm_weight >= 0.0) {
            return Err(Error::Config(format!("LM weight must be nonnegative, got {}", self.lm_weight)));
        }
        if self.score_floor.is_nan() {
            return Err(Error::Config("score floor is NaN".into()));
        }
        Ok(())
    }
}

/// One entry of the final beam.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamHypothesis {
    /// Prefix units; an inserted space is the unit `alphabet.len()`.
    pub units: Vec<usize>,
    /// Acoustic labels only, i.e. the units without inserted spaces.
    pub transcription: Transcription,
    pub text: String,
    pub log_p_blank: f64,
    pub log_p_nonblank: f64,
    /// Unweighted natural-log LM probability of the prefix.
    pub lm_log: f64,
    /// Number of LM-scored characters.
    pub emissions: usize,
    pub score: f64,
}

impl BeamHypothesis {
    /// `ln` of the total acoustic mass of the prefix.
    pub fn acoustic(&self) -> f64 {
        log_add(self.log_p_blank, self.log_p_nonblank)
    }

    pub fn words(&self) -> Vec<&str> {
        self.text.split_whitespace().collect()
    }
}

/// `acoustic + lm_weight * lm_log + emissions * ln(b)`.
pub fn combined_score(acoustic: f64, lm_log: f64, emissions: usize, cfg: &BeamConfig) -> f64 {
    if acoustic == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let lm = if cfg.lm_weight == 0.0 { 0.0 } else { cfg.lm_weight * lm_log };
    acoustic + lm + emissions as f64 * cfg.insertion_bonus.ln()
}

#[derive(Clone, Debug)]
struct Hyp<S> {
    pb: f64,
    pnb: f64,
    /// Last acoustic label, which differs from the last unit after an inserted space.
    last: Option<usize>,
    lm_state: S,
    lm_log: f64,
    emissions: usize,
}

impl<S> Hyp<S> {
    fn total(&self) -> f64 {
        log_add(self.pb, self.pnb)
    }
}

struct LmCache<'a, L: CharLm> {
    lm: &'a mut L,
    memo: HashMap<(L::State, char), (f64, L::State)>,
}

impl<L: CharLm> LmCache<'_, L> {
    fn score(&mut self, state: &L::State, c: char) -> Result<(f64, L::State)> {
        if let Some(hit) = self.memo.get(&(state.clone(), c)) {
            return Ok(hit.clone());
        }
        let r = self.lm.score(state, c)?;
        self.memo.insert((state.clone(), c), r.clone());
        Ok(r)
    }
}

type Beam<S> = HashMap<Vec<usize>, Hyp<S>>;

/// Decodes one utterance; returns the final beam best-first (ties by prefix).
pub fn beam_decode<F: LogFloat, L: CharLm>(
    post: &PosteriorMatrix<F>,
    alphabet: &Alphabet,
    lm: &mut L,
    cfg: &BeamConfig,
) -> Result<Vec<BeamHypothesis>> {
    cfg.validate()?;
    if post.labels() != alphabet.len() {
        return Err(Error::invalid(format!(
            "posteriors have {} labels, alphabet has {}",
            post.labels(),
            alphabet.len()
        )));
    }
    let labels = alphabet.len();
    let space_unit = labels;
    let mut chars = Vec::with_capacity(labels + 1);
    chars.push('\0');
    for k in 1..labels {
        chars.push(alphabet.char_of(k).ok_or_else(|| {
            Error::Unsupported(format!(
                "symbol {:?} is not a single character and cannot be scored by a character LM",
                alphabet.symbols()[k]
            ))
        })?);
    }
    chars.push(' ');
    if cfg.space_insertion {
        if alphabet.space_index().is_some() {
            return Err(Error::Config(
                "space insertion is for alphabets without a space unit".into(),
            ));
        }
        if !lm.knows(' ') {
            return Err(Error::Config("space insertion is on but the LM has no space symbol".into()));
        }
    }

    let mut cache = LmCache { lm, memo: HashMap::new() };
    let mut beam: Beam<L::State> = HashMap::new();
    beam.insert(
        Vec::new(),
        Hyp {
            pb: 0.0,
            pnb: f64::NEG_INFINITY,
            last: None,
            lm_state: cache.lm.initial_state()?,
            lm_log: 0.0,
            emissions: 0,
        },
    );
    let mut order: Vec<Vec<usize>> = vec![Vec::new()];

    for t in 0..post.frames() {
        let row: Vec<f64> = post.row(t).iter().map(|v| v.as_f64()).collect();
        let mut next: Beam<L::State> = HashMap::with_capacity(order.len() * labels);
        for prefix in &order {
            let hyp = &beam[prefix];
            let total = hyp.total();
            // blank, and a repeat of the last label, keep the prefix
            let stay = next.entry(prefix.clone()).or_insert_with(|| Hyp {
                pb: f64::NEG_INFINITY,
                pnb: f64::NEG_INFINITY,
                ..hyp.clone()
            });
            stay.pb = log_add(stay.pb, total + row[BLANK]);
            if let Some(l) = hyp.last {
                stay.pnb = log_add(stay.pnb, hyp.pnb + row[l]);
            }
            for k in 1..labels {
                let mass = if hyp.last == Some(k) { hyp.pb + row[k] } else { total + row[k] };
                if mass == f64::NEG_INFINITY {
                    continue;
                }
                let mut extended = prefix.clone();
                extended.push(k);
                match next.get_mut(&extended) {
                    Some(h) => h.pnb = log_add(h.pnb, mass),
                    None => {
                        let (lp, state) = cache.score(&hyp.lm_state, chars[k])?;
                        next.insert(
                            extended,
                            Hyp {
                                pb: f64::NEG_INFINITY,
                                pnb: mass,
                                last: Some(k),
                                lm_state: state,
                                lm_log: hyp.lm_log + lp,
                                emissions: hyp.emissions + 1,
                            },
                        );
                    }
                }
            }
        }

        if cfg.space_insertion {
            let mut bases: Vec<&Vec<usize>> = next
                .keys()
                .filter(|p| p.last().is_some_and(|&u| u != space_unit))
                .collect();
            bases.sort_unstable();
            let mut spaced = Vec::with_capacity(bases.len());
            for base in bases {
                let hyp = &next[base];
                let mut key = base.clone();
                key.push(space_unit);
                // A spaced prefix already present carries the paths of `base` as
                // it was one frame ago; when `base` was in that beam those paths
                // are a subset of the copy, so the copy replaces them.
                let carried = beam.contains_key(base);
                let (lp, state) = cache.score(&hyp.lm_state, ' ')?;
                spaced.push((
                    key,
                    Hyp {
                        pb: hyp.pb,
                        pnb: hyp.pnb,
                        last: hyp.last,
                        lm_state: state,
                        lm_log: hyp.lm_log + lp,
                        emissions: hyp.emissions + 1,
                    },
                    carried,
                ));
            }
            for (key, copy, carried) in spaced {
                match next.get_mut(&key) {
                    Some(h) if !carried => {
                        h.pb = log_add(h.pb, copy.pb);
                        h.pnb = log_add(h.pnb, copy.pnb);
                    }
                    Some(h) => {
                        h.pb = copy.pb;
                        h.pnb = copy.pnb;
                    }
                    None => {
                        next.insert(key, copy);
                    }
                }
            }
        }

        order = prune(&next, cfg);
        let keep: std::collections::HashSet<&Vec<usize>> = order.iter().collect();
        next.retain(|k, _| keep.contains(k));
        beam = next;
        if beam.is_empty() {
            break;
        }
    }

    if order.is_empty() {
        log::warn!("beam emptied by pruning; returning the empty transcription");
        return Ok(vec![BeamHypothesis {
            units: Vec::new(),
            transcription: Transcription(Vec::new()),
            text: String::new(),
            log_p_blank: f64::NEG_INFINITY,
            log_p_nonblank: f64::NEG_INFINITY,
            lm_log: 0.0,
            emissions: 0,
            score: f64::NEG_INFINITY,
        }]);
    }
    Ok(order
        .into_iter()
        .map(|units| {
            let h = &beam[&units];
            let labels: Vec<usize> = units.iter().copied().filter(|&u| u != space_unit).collect();
            let text = units.iter().map(|&u| chars[u]).collect();
            BeamHypothesis {
                score: combined_score(h.total(), h.lm_log, h.emissions, cfg),
                units,
                transcription: Transcription(labels),
                text,
                log_p_blank: h.pb,
                log_p_nonblank: h.pnb,
                lm_log: h.lm_log,
                emissions: h.emissions,
            }
        })
        .collect())
}

/// Best-first prefixes that survive the floor and the width cut.
fn prune<S>(beam: &Beam<S>, cfg: &BeamConfig) -> Vec<Vec<usize>> {
    let mut scored: Vec<(f64, &Vec<usize>)> = beam
        .iter()
        .map(|(p, h)| (combined_score(h.total(), h.lm_log, h.emissions, cfg), p))
        .filter(|(s, _)| *s > f64::NEG_INFINITY && *s >= cfg.score_floor)
        .collect();
    scored.sort_unstable_by(|a, b| match b.0.total_cmp(&a.0) {
        Ordering::Equal => a.1.cmp(b.1),
        o => o,
    });
    scored.truncate(cfg.beam_width);
    scored.into_iter().map(|(_, p)| p.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::charlm::{train_char_ngram, UniformCharLm};
    use crate::oracle::{brute_force_argmax, brute_force_distribution, sequence_probability_forward};

    fn uniform() -> UniformCharLm {
        UniformCharLm::new(30)
    }

    fn exact_cfg(width: usize) -> BeamConfig {
        BeamConfig { beam_width: width, insertion_bonus: 1.0, lm_weight: 0.0, ..BeamConfig::default() }
    }

    #[test]
    fn fixture_matches_argmax() {
        let alpha = Alphabet::from_chars("ab").unwrap();
        let post =
            PosteriorMatrix::<f64>::from_probs(&[[0.25, 0.4, 0.35], [0.4, 0.3, 0.3], [0.1, 0.5, 0.4]]).unwrap();
        let out = beam_decode(&post, &alpha, &mut uniform(), &exact_cfg(100)).unwrap();
        let (z, lp) = brute_force_argmax(&post, 1_000).unwrap();
        assert_eq!(out[0].transcription, z);
        assert!((out[0].acoustic() - lp).abs() < 1e-12);
    }

    #[test]
    fn exhaustive_masses_match_the_forward_algorithm() {
        let alpha = Alphabet::from_chars("abc").unwrap();
        let post = PosteriorMatrix::<f64>::from_probs(&[
            [0.1, 0.5, 0.2, 0.2],
            [0.3, 0.3, 0.2, 0.2],
            [0.2, 0.1, 0.6, 0.1],
            [0.25, 0.25, 0.25, 0.25],
        ])
        .unwrap();
        let out = beam_decode(&post, &alpha, &mut uniform(), &exact_cfg(10_000)).unwrap();
        let dist = brute_force_distribution(&post, 1_000).unwrap();
        assert_eq!(out.len(), dist.len());
        for h in &out {
            let fwd = sequence_probability_forward(&h.transcription, &post).unwrap();
            assert!((h.acoustic() - fwd).abs() < 1e-10, "{:?}", h.text);
        }
    }

    #[test]
    fn lm_flips_the_result() {
        // "a" beats "ab" acoustically by a small margin
        let alpha = Alphabet::from_chars("ab").unwrap();
        let post =
            PosteriorMatrix::<f64>::from_probs(&[[0.1, 0.8, 0.1], [0.55, 0.0, 0.45]]).unwrap();
        // without a sentence-end score an LM alone only shortens output; the bonus offsets that
        let cfg = BeamConfig { beam_width: 1000, ..BeamConfig::default() };
        let plain = beam_decode(&post, &alpha, &mut UniformCharLm::new(3), &cfg).unwrap();
        assert_eq!(plain[0].text, "a");
        let lines = vec!["ab"; 50];
        let mut lm = train_char_ngram(&lines, 3, 0.75, 128).unwrap();
        let fused = beam_decode(&post, &alpha, &mut lm, &cfg).unwrap();
        assert_eq!(fused[0].text, "ab");
        // exhaustive prefix scoring agrees
        let score = |z: &str, lm: &mut crate::lm::CharNGram| {
            let t = Transcription(alpha.encode_chars(z).unwrap());
            let mut state = lm.initial_state().unwrap();
            let mut lm_log = 0.0;
            for c in z.chars() {
                let (lp, next) = lm.score(&state, c).unwrap();
                lm_log += lp;
                state = next;
            }
            let am = sequence_probability_forward(&t, &post).unwrap();
            combined_score(am, lm_log, z.len(), &cfg)
        };
        let ranked: Vec<(f64, &str)> = ["", "a", "b", "ab", "ba", "aa", "bb"].iter().map(|z| (score(z, &mut lm), *z)).collect();
        let best = ranked.iter().max_by(|x, y| x.0.total_cmp(&y.0)).unwrap();
        assert_eq!(best.1, "ab");
        assert!((best.0 - fused[0].score).abs() < 1e-10);
    }

    #[test]
    fn scores_decompose() {
        let alpha = Alphabet::from_chars("abc").unwrap();
        let post = PosteriorMatrix::<f64>::from_probs(&[
            [0.1, 0.5, 0.2, 0.2],
            [0.3, 0.3, 0.2, 0.2],
            [0.2, 0.1, 0.6, 0.1],
        ])
        .unwrap();
        let mut lm = train_char_ngram(&["abc", "cab", "bca"], 3, 0.75, 128).unwrap();
        let cfg = BeamConfig { beam_width: 5, insertion_bonus: 2.5, lm_weight: 0.7, ..BeamConfig::default() };
        for h in beam_decode(&post, &alpha, &mut lm, &cfg).unwrap() {
            let mass = (h.log_p_blank.exp() + h.log_p_nonblank.exp()).ln();
            let expected = mass + 0.7 * h.lm_log + h.emissions as f64 * 2.5f64.ln();
            assert!((h.score - expected).abs() < 1e-8);
            assert_eq!(h.emissions, h.transcription.len());
        }
    }

    #[test]
    fn blank_dominant_input_decodes_to_nothing() {
        let alpha = Alphabet::from_chars("ab").unwrap();
        let post = PosteriorMatrix::<f64>::from_probs(&[[0.9, 0.05, 0.05]; 4]).unwrap();
        let mut lm = train_char_ngram(&["ab", "ba"], 2, 0.75, 128).unwrap();
        let cfg = BeamConfig { insertion_bonus: 1.0, ..BeamConfig::default() };
        let out = beam_decode(&post, &alpha, &mut lm, &cfg).unwrap();
        assert_eq!(out[0].text, "");
    }

    #[test]
    fn config_errors() {
        let alpha = Alphabet::from_chars("ab").unwrap();
        let post = PosteriorMatrix::<f64>::from_probs(&[[0.5, 0.25, 0.25]]).unwrap();
        for cfg in [
            BeamConfig { beam_width: 0, ..BeamConfig::default() },
            BeamConfig { insertion_bonus: 0.0, ..BeamConfig::default() },
            BeamConfig { lm_weight: -1.0, ..BeamConfig::default() },
        ] {
            assert!(matches!(beam_decode(&post, &alpha, &mut uniform(), &cfg), Err(Error::Config(_))));
        }
        let cfg = BeamConfig { space_insertion: true, ..BeamConfig::default() };
        let mut no_space = UniformCharLm::over("ab".chars());
        assert!(matches!(beam_decode(&post, &alpha, &mut no_space, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn space_insertion_gate() {
        let alpha = Alphabet::from_chars("ab").unwrap();
        let post = PosteriorMatrix::<f64>::from_probs(&[[0.2, 0.5, 0.3], [0.6, 0.2, 0.2], [0.1, 0.2, 0.7]]).unwrap();
        let cfg = BeamConfig { beam_width: 4, ..BeamConfig::default() };
        let a = beam_decode(&post, &alpha, &mut uniform(), &cfg).unwrap();
        let b = beam_decode(&post, &alpha, &mut uniform(), &BeamConfig { space_insertion: false, ..cfg }).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|h| !h.text.contains(' ')));
    }

    #[test]
    fn improbable_spaces_never_displace_originals() {
        let alpha = Alphabet::from_chars("ab").unwrap();
        let post = PosteriorMatrix::<f64>::from_probs(&[[0.2, 0.5, 0.3], [0.6, 0.2, 0.2], [0.1, 0.2, 0.7]]).unwrap();
        // a space costs far more than the bonus repays
        let mut lm = train_char_ngram(&vec!["abab"; 20], 2, 0.75, 128).unwrap();
        let mut lines = vec!["abab".to_string(); 2000];
        lines.push("a b".into());
        let mut rare = train_char_ngram(&lines, 2, 0.75, 128).unwrap();
        let cfg = BeamConfig { beam_width: 1, ..BeamConfig::default() };
        let plain = beam_decode(&post, &alpha, &mut lm, &cfg).unwrap();
        let spaced = beam_decode(&post, &alpha, &mut rare, &BeamConfig { space_insertion: true, ..cfg }).unwrap();
        assert!(!spaced[0].text.contains(' '));
        assert_eq!(plain[0].transcription, spaced[0].transcription);
    }

    #[test]
    fn spaced_copies_keep_the_acoustic_mass() {
        let alpha = Alphabet::from_chars("hes").unwrap();
        let post = PosteriorMatrix::<f64>::from_probs(&[
            [0.1, 0.8, 0.05, 0.05],
            [0.5, 0.1, 0.3, 0.1],
            [0.2, 0.05, 0.7, 0.05],
            [0.6, 0.1, 0.1, 0.2],
            [0.1, 0.05, 0.05, 0.8],
        ])
        .unwrap();
        let lines = ["he s", "he said", "she is", "he sees", "s he"];
        let mut lm = train_char_ngram(&lines, 3, 0.75, 128).unwrap();
        let cfg = BeamConfig { beam_width: 100_000, space_insertion: true, ..BeamConfig::default() };
        let out = beam_decode(&post, &alpha, &mut lm, &cfg).unwrap();
        assert!(out.iter().any(|h| h.text == "he s"));
        for h in &out {
            let fwd = sequence_probability_forward(&h.transcription, &post).unwrap();
            assert!((h.acoustic() - fwd).abs() < 1e-10, "{:?}", h.text);
        }
    }
}
