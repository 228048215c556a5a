//! End-to-end comparison on a synthetic corpus.
//!
//! Sentences come from a small class grammar. For each test sentence a frame
//! alignment is drawn and turned into two posterior matrices with the same
//! noise: one over a cased alphabet (an upper-case letter starts a word) for
//! greedy decoding, and one over lowercase letters without a space unit for
//! the beam and WFST decoders. Everything is derived from one seed, and each
//! utterance has its own random stream so results do not depend on threading.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path as FsPath;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::alphabet::{Alphabet, WordConvention};
use crate::beam::{beam_decode, BeamConfig};
use crate::error::{Error, Result};
use crate::greedy::{greedy_decode, render_words};
use crate::io::{format_alphabet, format_lexicon, format_priors, write_posteriors, Lexicon};
use crate::lm::{bits_per_character, format_arpa, train_char_ngram, train_word_ngram, CharNGram, NGramLm};
use crate::posterior::{estimate_priors, PosteriorMatrix, PriorVector, DEFAULT_PRIOR_FLOOR};
use crate::score::{align, compare_report, normalize, oov_analysis, BonusDiagnostic, Comparison};
use crate::wfst::{build_decoding_graph, wfst_decode, Wfst, WfstConfig, TropicalWeight};

const DETERMINERS: &[&str] = &["the", "a", "my", "your", "this", "that"];
const ADJECTIVES: &[&str] = &["big", "small", "red", "old", "happy", "quiet"];
const NOUNS: &[&str] = &["cat", "dog", "house", "car", "tree", "bird", "friend", "teacher", "garden", "river"];
const VERBS: &[&str] = &["sees", "likes", "finds", "wants", "takes", "helps", "paints", "follows"];
const ADVERBS: &[&str] = &["today", "again", "slowly", "often", "now"];
const PRONOUNS: &[&str] = &["she", "he", "we", "they"];

#[derive(Clone, Debug, PartialEq)]
pub struct DemoConfig {
    pub seed: u64,
    pub train_sentences: usize,
    pub test_utterances: usize,
    /// Probability that a character's peak moves to a neighbouring letter.
    pub confusion: f64,
    /// Probability that a character's capitalization is inverted in the cased posteriors.
    pub boundary_confusion: f64,
    pub char_order: usize,
    pub word_order: usize,
    pub beam: BeamConfig,
    pub wfst: WfstConfig,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            train_sentences: 600,
            test_utterances: 40,
            confusion: 0.12,
            boundary_confusion: 0.04,
            char_order: 6,
            word_order: 3,
            beam: BeamConfig { beam_width: 24, space_insertion: true, ..BeamConfig::default() },
            wfst: WfstConfig { max_active: Some(3000), ..WfstConfig::default() },
        }
    }
}

/// Everything the decoders consume, generated from the seed.
#[derive(Clone, Debug)]
pub struct DemoCorpus {
    pub train: Vec<String>,
    /// `(id, transcript)` per test utterance.
    pub test: Vec<(String, String)>,
    pub cased_alphabet: Alphabet,
    pub plain_alphabet: Alphabet,
    pub lexicon: Lexicon,
    pub cased_posteriors: Vec<PosteriorMatrix<f64>>,
    pub plain_posteriors: Vec<PosteriorMatrix<f64>>,
}

fn pick<'a>(rng: &mut ChaCha8Rng, words: &[&'a str]) -> &'a str {
    words.choose(rng).expect("non-empty word class")
}

fn sentence(rng: &mut ChaCha8Rng) -> String {
    let mut w: Vec<&str> = Vec::new();
    match rng.gen_range(0..4) {
        0 => {
            w.extend([pick(rng, DETERMINERS), pick(rng, NOUNS), pick(rng, VERBS)]);
            w.extend([pick(rng, DETERMINERS), pick(rng, NOUNS)]);
        }
        1 => {
            w.extend([pick(rng, DETERMINERS), pick(rng, ADJECTIVES), pick(rng, NOUNS), pick(rng, VERBS)]);
            w.extend([pick(rng, DETERMINERS), pick(rng, NOUNS), pick(rng, ADVERBS)]);
        }
        2 => {
            w.extend([pick(rng, DETERMINERS), pick(rng, NOUNS), pick(rng, VERBS)]);
            w.extend([pick(rng, DETERMINERS), pick(rng, ADJECTIVES), pick(rng, NOUNS)]);
        }
        _ => {
            w.extend([pick(rng, PRONOUNS), pick(rng, VERBS), pick(rng, DETERMINERS), pick(rng, NOUNS)]);
            if rng.gen_bool(0.5) {
                w.push(pick(rng, ADVERBS));
            }
        }
    }
    w.join(" ")
}

fn vocabulary() -> Vec<&'static str> {
    let mut v: Vec<&str> = [DETERMINERS, ADJECTIVES, NOUNS, VERBS, ADVERBS, PRONOUNS].concat();
    v.sort_unstable();
    v.dedup();
    v
}

#[derive(Clone, Copy)]
struct Frame {
    truth: char,
    /// Letter holding the peak; a neighbour of `truth` when confused.
    shown: char,
    upper: bool,
}

/// Frame alignment of a sentence; `None` is blank. A character is
/// capitalized when it starts a word, except that with probability
/// `boundary_confusion` the flag is inverted. Confusions and flips hold for
/// every frame of a character.
fn align_frames(rng: &mut ChaCha8Rng, text: &str, cfg: &DemoConfig) -> Vec<Option<Frame>> {
    let mut frames = Vec::new();
    let blanks = |rng: &mut ChaCha8Rng, lo: usize, hi: usize, out: &mut Vec<Option<Frame>>| {
        let n = rng.gen_range(lo..=hi);
        out.extend(std::iter::repeat_n(None, n));
    };
    blanks(rng, 1, 3, &mut frames);
    let mut prev: Option<char> = None;
    for (wi, word) in text.split(' ').enumerate() {
        if wi > 0 {
            blanks(rng, 0, 2, &mut frames);
        }
        for (ci, c) in word.chars().enumerate() {
            if prev == Some(c) && frames.last().is_some_and(Option::is_some) {
                frames.push(None);
            } else if rng.gen_bool(0.3) {
                blanks(rng, 1, 2, &mut frames);
            }
            let dur = *[1usize, 1, 2, 2, 2, 3].choose(rng).expect("durations");
            let upper = (ci == 0) != rng.gen_bool(cfg.boundary_confusion);
            let shown = if rng.gen_bool(cfg.confusion) { neighbour(rng, c) } else { c };
            frames.extend(std::iter::repeat_n(Some(Frame { truth: c, shown, upper }), dur));
            prev = Some(c);
        }
    }
    blanks(rng, 1, 3, &mut frames);
    frames
}

fn letter_index(c: char) -> usize {
    (c as u8 - b'a') as usize
}

fn neighbour(rng: &mut ChaCha8Rng, c: char) -> char {
    let i = letter_index(c) as i32;
    let j = if rng.gen_bool(0.5) { i + 1 } else { i - 1 };
    (b'a' + j.rem_euclid(26) as u8) as char
}

/// Normalized row: `peak` mass on `top`, `second` on `runner`, the rest spread randomly.
fn noisy_row(rng: &mut ChaCha8Rng, labels: usize, top: usize, peak: f64, runner: usize, second: f64) -> Vec<f64> {
    let noise: Vec<f64> = (0..labels).map(|_| rng.gen_range(0.0..1.0)).collect();
    let total: f64 = noise.iter().sum();
    let rest = 1.0 - peak - second;
    let mut row: Vec<f64> = noise.iter().map(|x| rest * x / total).collect();
    row[top] += peak;
    row[runner] += second;
    row
}

fn utterance_posteriors(
    seed: u64,
    text: &str,
    cfg: &DemoConfig,
) -> (PosteriorMatrix<f64>, PosteriorMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = align_frames(&mut rng, text, cfg);
    let mut cased = Vec::with_capacity(frames.len());
    let mut plain = Vec::with_capacity(frames.len());
    // plain: 0 blank, 1..=26 letters; cased adds 27..=52 for capitals
    let plain_label = |c: char| 1 + letter_index(c);
    let cased_label = |c: char, upper: bool| 1 + letter_index(c) + if upper { 26 } else { 0 };
    for frame in frames {
        let peak = rng.gen_range(0.45..0.9);
        let second = rng.gen_range(0.0..(1.0 - peak) * 0.8);
        match frame {
            None => {
                let stray = (b'a' + rng.gen_range(0..26u8)) as char;
                let (p, c) = if rng.gen_bool(cfg.confusion / 8.0) {
                    ((plain_label(stray), 0), (cased_label(stray, false), 0))
                } else {
                    ((0, plain_label(stray)), (0, cased_label(stray, false)))
                };
                plain.push(noisy_row(&mut rng, 27, p.0, peak, p.1, second));
                cased.push(noisy_row(&mut rng, 53, c.0, peak, c.1, second));
            }
            Some(Frame { truth, shown, upper }) => {
                let runner = if shown == truth { neighbour(&mut rng, truth) } else { truth };
                let p = (plain_label(shown), plain_label(runner));
                let c = (cased_label(shown, upper), cased_label(runner, upper));
                plain.push(noisy_row(&mut rng, 27, p.0, peak, p.1, second));
                cased.push(noisy_row(&mut rng, 53, c.0, peak, c.1, second));
            }
        }
    }
    // quantized to file precision so decoding the written corpus reproduces the demo
    let stored = |rows: &[Vec<f64>]| {
        let post = PosteriorMatrix::<f64>::from_probs(rows).expect("rows are normalized");
        post.cast::<f32>().and_then(|p| p.cast::<f64>()).expect("f32 keeps rows normalized")
    };
    (stored(&cased), stored(&plain))
}

/// Builds the corpus; posteriors are generated in parallel but depend only on the seed.
pub fn generate_corpus(cfg: &DemoConfig) -> Result<DemoCorpus> {
    if cfg.train_sentences == 0 || cfg.test_utterances == 0 {
        return Err(Error::Config("demo needs training sentences and test utterances".into()));
    }
    if !(0.0..=1.0).contains(&cfg.confusion) || !(0.0..=1.0).contains(&cfg.boundary_confusion) {
        return Err(Error::Config("confusion probabilities must lie in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let train: Vec<String> = (0..cfg.train_sentences).map(|_| sentence(&mut rng)).collect();
    let test: Vec<(String, String)> = (0..cfg.test_utterances)
        .map(|i| (format!("utt{:03}", i + 1), sentence(&mut rng)))
        .collect();
    let streams: Vec<u64> = (0..test.len()).map(|_| rng.gen()).collect();
    let (cased_posteriors, plain_posteriors): (Vec<_>, Vec<_>) = test
        .par_iter()
        .zip(streams.par_iter())
        .map(|((_, text), &s)| utterance_posteriors(s, text, cfg))
        .unzip();

    let lower: String = ('a'..='z').collect();
    let upper: String = ('A'..='Z').collect();
    let cased_alphabet = Alphabet::from_chars(&format!("{lower}{upper}"))?.with_convention(WordConvention::Case)?;
    let plain_alphabet = Alphabet::from_chars(&lower)?;
    Ok(DemoCorpus {
        train,
        test,
        cased_alphabet,
        plain_alphabet,
        lexicon: Lexicon::spelled(vocabulary()),
        cased_posteriors,
        plain_posteriors,
    })
}

impl DemoCorpus {
    /// Writes the corpus as files the CLI reads: alphabets, lexicon, training
    /// text, references, posteriors and manifests.
    pub fn write_to(&self, dir: impl AsRef<FsPath>) -> Result<()> {
        let dir = dir.as_ref();
        let write = |name: &str, text: String| {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(p, e))
        };
        std::fs::create_dir_all(dir.join("post")).map_err(|e| Error::io(dir, e))?;
        write("cased.alphabet", format_alphabet(&self.cased_alphabet))?;
        write("plain.alphabet", format_alphabet(&self.plain_alphabet))?;
        write("lexicon.txt", format_lexicon(&self.lexicon))?;
        write("train.txt", self.train.iter().map(|l| format!("{l}\n")).collect())?;
        write("ref.txt", self.test.iter().map(|(id, t)| format!("{id}\t{t}\n")).collect())?;
        let mut cased_manifest = String::new();
        let mut plain_manifest = String::new();
        for (i, (id, _)) in self.test.iter().enumerate() {
            let c = format!("post/{id}.cased.ctcp");
            let p = format!("post/{id}.plain.ctcp");
            write_posteriors(dir.join(&c), &self.cased_posteriors[i])?;
            write_posteriors(dir.join(&p), &self.plain_posteriors[i])?;
            let _ = writeln!(cased_manifest, "{id}\t{c}");
            let _ = writeln!(plain_manifest, "{id}\t{p}");
        }
        write("cased.manifest", cased_manifest)?;
        write("plain.manifest", plain_manifest)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DemoUtterance {
    pub id: String,
    pub reference: String,
    pub greedy: String,
    pub beam: String,
    pub wfst: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DemoReport {
    pub words: usize,
    pub graph_states: usize,
    pub graph_arcs: usize,
    pub char_lm_bpc: f64,
    pub comparison: Comparison,
    pub utterances: Vec<DemoUtterance>,
}

impl DemoReport {
    pub fn wer(&self, system: &str) -> Option<f64> {
        self.comparison.systems.iter().find(|s| s.system == system).map(|s| s.wer)
    }

    pub fn render(&self, examples: usize) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "synthetic corpus: {} test utterances, {} reference words",
            self.utterances.len(),
            self.words
        );
        let _ = writeln!(out, "decoding graph: {} states, {} arcs", self.graph_states, self.graph_arcs);
        out.push('\n');
        out.push_str(&self.comparison.to_table());
        for u in self.utterances.iter().take(examples) {
            let _ = write!(
                out,
                "\n{}\n  ref    {}\n  greedy {}\n  beam   {}\n  wfst   {}\n",
                u.id, u.reference, u.greedy, u.beam, u.wfst
            );
        }
        out
    }
}

pub const GREEDY: &str = "greedy";
pub const BEAM: &str = "beam+charlm";
pub const WFST: &str = "wfst+wordlm";

/// Trained models and graph for a corpus.
pub struct DemoModels {
    pub char_lm: CharNGram,
    pub word_lm: NGramLm,
    pub graph: Wfst<TropicalWeight<f64>>,
    pub prior: PriorVector<f64>,
}

pub fn train_models(corpus: &DemoCorpus, cfg: &DemoConfig) -> Result<DemoModels> {
    let char_lm = train_char_ngram(&corpus.train, cfg.char_order, 0.75, crate::lm::charlm::DEFAULT_MAX_SENTENCE_CHARS)?;
    let word_lm = train_word_ngram(&corpus.train, cfg.word_order, 0.75)?;
    let graph = build_decoding_graph(&corpus.plain_alphabet, &corpus.lexicon, &word_lm)?;
    let prior = estimate_priors(&corpus.plain_posteriors, DEFAULT_PRIOR_FLOOR)?;
    Ok(DemoModels { char_lm, word_lm, graph, prior })
}

/// Train, build, decode three ways and score.
pub fn run_demo(cfg: &DemoConfig) -> Result<DemoReport> {
    let corpus = generate_corpus(cfg)?;
    let models = train_models(&corpus, cfg)?;
    let lm = &models.char_lm;

    let decoded: Vec<Result<(String, String, String)>> = (0..corpus.test.len())
        .into_par_iter()
        .map(|i| {
            let z = greedy_decode(&corpus.cased_posteriors[i], &corpus.cased_alphabet)?;
            let greedy = render_words(&z, &corpus.cased_alphabet)?.join(" ").to_lowercase();
            let mut session = lm;
            let hyps = beam_decode(&corpus.plain_posteriors[i], &corpus.plain_alphabet, &mut session, &cfg.beam)?;
            let beam = hyps[0].words().join(" ");
            let out = wfst_decode(&corpus.plain_posteriors[i], &models.prior, &models.graph, &cfg.wfst)?;
            Ok((greedy, beam, out.words.join(" ")))
        })
        .collect();

    let mut utterances = Vec::with_capacity(decoded.len());
    let mut totals = [Default::default(), Default::default(), Default::default()];
    let mut hyp_tokens: [Vec<String>; 3] = Default::default();
    let mut words = 0;
    for ((id, reference), d) in corpus.test.iter().zip(decoded) {
        let (greedy, beam, wfst) = d?;
        let r = normalize(reference);
        words += r.len();
        for (k, h) in [&greedy, &beam, &wfst].into_iter().enumerate() {
            let h = normalize(h);
            let report = align(&r, &h);
            crate::score::AlignmentReport::accumulate(&mut totals[k], &report);
            hyp_tokens[k].extend(h);
        }
        utterances.push(DemoUtterance { id: id.clone(), reference: reference.clone(), greedy, beam, wfst });
    }
    let vocab: HashSet<String> = crate::lm::wordlm::vocabulary(&models.word_lm)
        .into_iter()
        .map(String::from)
        .collect();
    let [g, b, w] = totals;
    let systems = [(GREEDY, g, 0), (BEAM, b, 1), (WFST, w, 2)]
        .into_iter()
        .map(|(name, report, k)| (name.to_string(), report, Some(oov_analysis(&hyp_tokens[k], &vocab))))
        .collect::<Vec<_>>();
    let held_out: Vec<&str> = corpus.test.iter().map(|(_, t)| t.as_str()).collect();
    let char_lm_bpc = bits_per_character(&mut &models.char_lm, &held_out)?;
    let comparison = compare_report(&systems).with_bonus(BonusDiagnostic::new(cfg.beam.insertion_bonus, Some(char_lm_bpc)));
    Ok(DemoReport {
        words,
        graph_states: models.graph.num_states(),
        graph_arcs: models.graph.num_arcs(),
        char_lm_bpc,
        comparison,
        utterances,
    })
}

/// ARPA text of both models plus the prior file, for writing next to the corpus.
pub fn model_files(models: &DemoModels) -> [(String, String); 3] {
    [
        ("char.arpa".into(), format_arpa(models.char_lm.ngram())),
        ("word.arpa".into(), format_arpa(&models.word_lm)),
        ("prior.txt".into(), format_priors(&models.prior)),
    ]
}
