use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path as FsPath, PathBuf};

use ctc_core::beam::{beam_decode, BeamConfig, BeamHypothesis};
use ctc_core::demo::{generate_corpus, model_files, run_demo, train_models, DemoConfig};
use ctc_core::greedy::{greedy_decode, render_words};
use ctc_core::io::{format_priors, read_alphabet, read_keyed_lines, read_lexicon, read_posteriors, read_priors};
use ctc_core::lm::charlm::{DEFAULT_CHAR_ORDER, DEFAULT_MAX_SENTENCE_CHARS};
use ctc_core::lm::external::DEFAULT_TIMEOUT;
use ctc_core::lm::{read_arpa, serve_char_lm, train_char_ngram, train_word_ngram, write_arpa, CharNGram, ExternalLm, UniformCharLm};
use ctc_core::oracle::sequence_probability_forward;
use ctc_core::score::{compare_report, normalize, oov_analysis, score_corpus};
use ctc_core::wfst::{build_decoding_graph, read_graph, wfst_decode, write_graph, DecodeStatus, WfstConfig};
use ctc_core::{estimate_priors, Alphabet, Error, Graph, Posteriors, Priors, Result, Transcription, WordConvention};
use rayon::prelude::*;

use crate::{BeamArgs, Cli, Command, Convention, Decode, GreedyArgs, Input, WfstArgs};

const DEFAULT_WORD_ORDER: usize = 3;

pub fn run(cli: Cli) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} worker threads: {e}", cli.threads)))?;
    let seed = cli.seed;
    let out = pool.install(|| dispatch(cli.command, seed))?;
    let mut stdout = std::io::stdout().lock();
    match stdout.write_all(out.as_bytes()).and_then(|_| stdout.flush()) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        Err(e) => Err(Error::io("<stdout>", e)),
    }
}

fn dispatch(command: Command, seed: u64) -> Result<String> {
    match command {
        Command::Decode(Decode::Greedy(args)) => greedy(&args),
        Command::Decode(Decode::Beam(args)) => beam(&args),
        Command::Decode(Decode::Wfst(args)) => wfst(&args),
        Command::TrainCharlm(args) => {
            let lines = read_lines(&args.corpus)?;
            let order = args.order.unwrap_or(DEFAULT_CHAR_ORDER);
            let lm = train_char_ngram(&lines, order, args.discount, DEFAULT_MAX_SENTENCE_CHARS)?;
            write_arpa(&args.out, lm.ngram())?;
            log::info!("character LM of order {order} written to {}", args.out.display());
            Ok(String::new())
        }
        Command::TrainWordlm(args) => {
            let lines = read_lines(&args.corpus)?;
            let lm = train_word_ngram(&lines, args.order.unwrap_or(DEFAULT_WORD_ORDER), args.discount)?;
            write_arpa(&args.out, &lm)?;
            Ok(String::new())
        }
        Command::BuildGraph(args) => {
            let alphabet = read_alphabet(&args.alphabet)?;
            let lexicon = read_lexicon(&args.lexicon)?;
            let lm = read_arpa(&args.arpa)?;
            let graph = build_decoding_graph(&alphabet, &lexicon, &lm)?;
            write_graph(&args.out, &graph)?;
            log::info!("graph: {} states, {} arcs", graph.num_states(), graph.num_arcs());
            Ok(String::new())
        }
        Command::Score(args) => score(&args),
        Command::ScoreSeq(args) => {
            let alphabet = read_alphabet(&args.alphabet)?;
            let post: Posteriors = read_posteriors(&args.post)?;
            check_labels(&post, &alphabet)?;
            let z = Transcription::new(alphabet.encode_symbols(&args.symbols)?)?;
            let lp = sequence_probability_forward(&z, &post)?;
            Ok(format!("{lp:.10}\n"))
        }
        Command::EstimatePriors(args) => {
            let posts = load_manifest(&args.manifest)?;
            let matrices: Vec<Posteriors> = posts.into_iter().map(|(_, p)| p).collect();
            let prior = estimate_priors(&matrices, args.floor)?;
            write_file(&args.out, &format_priors(&prior))?;
            Ok(String::new())
        }
        Command::Demo(args) => demo(&args, seed),
        Command::ServeCharlm(args) => {
            let stdin = std::io::stdin().lock();
            let stdout = std::io::stdout().lock();
            let stats = match (&args.charlm, args.uniform) {
                (Some(path), _) => serve_char_lm(&mut CharNGram::new(read_arpa(path)?)?, stdin, stdout)?,
                (None, Some(n)) => serve_char_lm(&mut UniformCharLm::new(n), stdin, stdout)?,
                (None, None) => return Err(Error::Config("give --charlm or --uniform".into())),
            };
            log::info!("served {} requests, {} handles still live", stats.requests, stats.handles_live);
            Ok(String::new())
        }
    }
}

fn read_lines(path: &FsPath) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(str::to_string).collect())
}

fn write_file(path: &FsPath, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn check_labels(post: &Posteriors, alphabet: &Alphabet) -> Result<()> {
    if post.labels() != alphabet.len() {
        return Err(Error::invalid(format!(
            "posteriors have {} labels, alphabet has {}",
            post.labels(),
            alphabet.len()
        )));
    }
    Ok(())
}

fn load_manifest(path: &FsPath) -> Result<Vec<(String, Posteriors)>> {
    let base = path.parent().map(FsPath::to_path_buf).unwrap_or_default();
    let entries = read_keyed_lines(path)?;
    let mut seen = HashSet::new();
    for (i, (id, file)) in entries.iter().enumerate() {
        if file.trim().is_empty() {
            return Err(Error::format(format!("{}:line {}", path.display(), i + 1), "missing posterior path"));
        }
        if !seen.insert(id.as_str()) {
            return Err(Error::format(format!("{}:line {}", path.display(), i + 1), format!("duplicate utterance id {id:?}")));
        }
    }
    entries
        .into_par_iter()
        .map(|(id, file)| {
            let p = PathBuf::from(file.trim());
            let p = if p.is_absolute() { p } else { base.join(p) };
            Ok((id, read_posteriors(&p)?))
        })
        .collect()
}

/// Utterances to decode, in output order.
fn load_input(input: &Input) -> Result<Vec<(String, Posteriors)>> {
    match (&input.post, &input.manifest) {
        (Some(p), _) => {
            let id = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "utt".into());
            Ok(vec![(id, read_posteriors(p)?)])
        }
        (None, Some(m)) => load_manifest(m),
        (None, None) => Err(Error::Config("give --post or --manifest".into())),
    }
}

/// Decodes every utterance on the pool and joins the per-utterance output in input order.
fn decode_all<D>(utts: &[(String, Posteriors)], decode: D) -> Result<String>
where
    D: Fn(&str, &Posteriors) -> Result<String> + Sync,
{
    let parts: Vec<Result<String>> = utts.par_iter().map(|(id, post)| decode(id, post)).collect();
    let mut out = String::new();
    for p in parts {
        out.push_str(&p?);
    }
    Ok(out)
}

fn greedy(args: &GreedyArgs) -> Result<String> {
    let alphabet = read_alphabet(&args.alphabet)?;
    let alphabet = match args.word_convention {
        None => alphabet.without_convention(),
        Some(Convention::Case) => alphabet.with_convention(WordConvention::Case)?,
        Some(Convention::Space) => alphabet.with_convention(WordConvention::Space)?,
    };
    let utts = load_input(&args.input)?;
    decode_all(&utts, |id, post| {
        let z = greedy_decode(post, &alphabet)?;
        let text = match alphabet.convention() {
            Some(_) => render_words(&z, &alphabet)?.join(" "),
            None => z.render(&alphabet),
        };
        Ok(format!("{id}\t{text}\n"))
    })
}

fn beam_lines(id: &str, hyps: &[BeamHypothesis], nbest: Option<usize>) -> String {
    match nbest {
        None => format!("{id}\t{}\n", hyps.first().map(|h| h.words().join(" ")).unwrap_or_default()),
        Some(n) => hyps.iter().take(n).fold(String::new(), |mut s, h| {
            let _ = writeln!(s, "{id}\t{}\t{:.6}", h.words().join(" "), h.score);
            s
        }),
    }
}

fn beam(args: &BeamArgs) -> Result<String> {
    let alphabet = read_alphabet(&args.alphabet)?;
    let cfg = BeamConfig {
        beam_width: args.beam,
        insertion_bonus: args.bonus,
        lm_weight: args.lm_weight,
        space_insertion: args.space_insertion,
        ..BeamConfig::default()
    };
    cfg.validate()?;
    if args.nbest == Some(0) {
        return Err(Error::Config("--nbest must be at least 1".into()));
    }
    let width = cfg.beam_width.max(args.nbest.unwrap_or(1));
    let cfg = BeamConfig { beam_width: width, ..cfg };
    let utts = load_input(&args.input)?;
    match (&args.charlm, &args.external_lm) {
        (Some(path), _) => {
            let lm = CharNGram::new(read_arpa(path)?)?;
            decode_all(&utts, |id, post| {
                let mut session = &lm;
                Ok(beam_lines(id, &beam_decode(post, &alphabet, &mut session, &cfg)?, args.nbest))
            })
        }
        (None, Some(command)) => decode_all(&utts, |id, post| {
            let mut lm = ExternalLm::spawn(command, alphabet.len() - 1, DEFAULT_TIMEOUT)?;
            let hyps = beam_decode(post, &alphabet, &mut lm, &cfg)?;
            lm.close()?;
            Ok(beam_lines(id, &hyps, args.nbest))
        }),
        (None, None) => Err(Error::Config("give --charlm or --external-lm".into())),
    }
}

fn wfst(args: &WfstArgs) -> Result<String> {
    let graph: Graph = read_graph(&args.graph)?;
    let prior: Priors = read_priors(&args.prior)?;
    let cfg = WfstConfig {
        max_active: (args.beam > 0).then_some(args.beam),
        acoustic_scale: args.acoustic_scale,
        word_insertion_penalty: args.word_insertion_penalty,
    };
    let utts = load_input(&args.input)?;
    decode_all(&utts, |id, post| {
        let out = wfst_decode(post, &prior, &graph, &cfg)?;
        match out.status {
            DecodeStatus::Complete => {}
            DecodeStatus::NoFinalState => log::warn!("{id}: no final state reached; printing the best partial path"),
            DecodeStatus::NoSurvivors => log::warn!("{id}: no path survived; printing an empty transcription"),
        }
        Ok(format!("{id}\t{}\n", out.words.join(" ")))
    })
}

fn score(args: &crate::Score) -> Result<String> {
    let refs = read_keyed_lines(&args.reference)?;
    let hyps = read_keyed_lines(&args.hyp)?;
    let scored = score_corpus(&refs, &hyps)?;
    let oov = match &args.vocab {
        Some(path) => {
            let vocab: HashSet<String> = read_lines(path)?
                .iter()
                .flat_map(|l| normalize(l))
                .collect();
            let tokens: Vec<String> = hyps.iter().flat_map(|(_, h)| normalize(h)).collect();
            Some(oov_analysis(&tokens, &vocab))
        }
        None => None,
    };
    let name = args.hyp.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "hyp".into());
    let comparison = compare_report(&[(name, scored.total.clone(), oov)]);
    let mut out = String::new();
    if args.json {
        let utterances = if args.per_utt { Some(&scored.utterances) } else { None };
        let value = serde_json::json!({ "comparison": comparison, "utterances": utterances });
        out.push_str(&serde_json::to_string_pretty(&value).expect("score report serializes"));
        out.push('\n');
        return Ok(out);
    }
    if args.per_utt {
        let _ = writeln!(out, "id\tN\tC\tS\tD\tI\tWER");
        for u in &scored.utterances {
            let r = &u.report;
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{:.2}%",
                u.id,
                r.n,
                r.correct,
                r.substitutions,
                r.deletions,
                r.insertions,
                100.0 * r.wer()
            );
        }
        out.push('\n');
    }
    out.push_str(&comparison.to_table());
    Ok(out)
}

fn demo(args: &crate::Demo, seed: u64) -> Result<String> {
    let cfg = DemoConfig { seed, ..DemoConfig::default() };
    let report = run_demo(&cfg)?;
    if let Some(dir) = &args.out_dir {
        let corpus = generate_corpus(&cfg)?;
        corpus.write_to(dir)?;
        let models = train_models(&corpus, &cfg)?;
        for (name, text) in model_files(&models) {
            write_file(&dir.join(name), &text)?;
        }
        write_graph(dir.join("graph.ctcg"), &models.graph)?;
    }
    if args.json {
        return Ok(format!("{}\n", serde_json::to_string_pretty(&report).expect("demo report serializes")));
    }
    Ok(report.render(args.examples))
}
