//! `ctc`: train language models, build decoding graphs, decode CTC posteriors
//! and score transcriptions.
//!
//! Failures print one line, `error[CLASS]: message`, to stderr and exit with
//! the class's code:
//!
//! | code | class |
//! |------|-------|
//! | 1 | other |
//! | 2 | usage |
//! | 3 | io |
//! | 4 | format, normalization |
//! | 5 | invalid-input |
//! | 6 | config |
//! | 7 | capacity |
//! | 8 | protocol |
//! | 9 | unsupported, build |
//!
//! Every flag can also be set through an environment variable named
//! `CTC_<FLAG>`, e.g. `CTC_THREADS=4`.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "ctc", version, about = "Decoding toolkit for CTC acoustic-model posteriors")]
pub struct Cli {
    /// Worker threads for batch work; 0 uses one per core. Never changes output.
    #[arg(long, global = true, env = "CTC_THREADS", default_value_t = 0)]
    pub threads: usize,
    /// Seed for anything randomized (the demo corpus).
    #[arg(long, global = true, env = "CTC_SEED", default_value_t = 1)]
    pub seed: u64,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, env = "CTC_LOG_LEVEL", default_value = "warn")]
    pub log_level: log::LevelFilter,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Decode posteriors into `UTTID<TAB>transcription` lines.
    #[command(subcommand)]
    Decode(Decode),
    /// Train a Kneser-Ney character LM and write it as ARPA.
    TrainCharlm(TrainLm),
    /// Train a Kneser-Ney word LM and write it as ARPA.
    TrainWordlm(TrainLm),
    /// Compose token, lexicon and grammar transducers into a decoding graph.
    BuildGraph(BuildGraph),
    /// Word error rate of hypotheses against references.
    Score(Score),
    /// Print ln P(z|X) for a transcription under a posterior file.
    ScoreSeq(ScoreSeq),
    /// Average posteriors over a manifest into a label prior file.
    EstimatePriors(EstimatePriors),
    /// Generate the synthetic corpus, decode it three ways and compare.
    Demo(Demo),
    /// Serve a character LM over the line protocol on stdin/stdout.
    ServeCharlm(ServeCharlm),
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
pub struct Input {
    /// A single posterior file; its file stem is the utterance id.
    #[arg(long, env = "CTC_POST")]
    pub post: Option<PathBuf>,
    /// `UTTID<TAB>posterior-path` lines; relative paths resolve against the manifest's directory.
    #[arg(long, env = "CTC_MANIFEST")]
    pub manifest: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Decode {
    Greedy(GreedyArgs),
    Beam(BeamArgs),
    Wfst(WfstArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Convention {
    Case,
    Space,
}

#[derive(Args, Debug)]
pub struct GreedyArgs {
    #[command(flatten)]
    pub input: Input,
    #[arg(long, env = "CTC_ALPHABET")]
    pub alphabet: PathBuf,
    /// Split the output into words; without it the symbols are concatenated.
    #[arg(long, env = "CTC_WORD_CONVENTION")]
    pub word_convention: Option<Convention>,
}

#[derive(Args, Debug)]
pub struct BeamArgs {
    #[command(flatten)]
    pub input: Input,
    #[arg(long, env = "CTC_ALPHABET")]
    pub alphabet: PathBuf,
    /// Character LM in ARPA format.
    #[arg(long, env = "CTC_CHARLM", conflicts_with = "external_lm", required_unless_present = "external_lm")]
    pub charlm: Option<PathBuf>,
    /// Command speaking the INIT/SCORE/FREE line protocol; one session per utterance.
    #[arg(long, env = "CTC_EXTERNAL_LM")]
    pub external_lm: Option<String>,
    #[arg(long, env = "CTC_BEAM", default_value_t = ctc_core::beam::DEFAULT_BEAM_WIDTH)]
    pub beam: usize,
    /// Insertion bonus b, rewarded per LM-scored character.
    #[arg(long, env = "CTC_BONUS", default_value_t = ctc_core::beam::DEFAULT_INSERTION_BONUS)]
    pub bonus: f64,
    #[arg(long, env = "CTC_LM_WEIGHT", default_value_t = 1.0)]
    pub lm_weight: f64,
    /// Let the LM place word boundaries for an alphabet without a space unit.
    #[arg(long, env = "CTC_SPACE_INSERTION")]
    pub space_insertion: bool,
    /// Print this many hypotheses per utterance, each with its score as a third column.
    #[arg(long, env = "CTC_NBEST")]
    pub nbest: Option<usize>,
}

#[derive(Args, Debug)]
pub struct WfstArgs {
    #[command(flatten)]
    pub input: Input,
    #[arg(long, env = "CTC_GRAPH")]
    pub graph: PathBuf,
    #[arg(long, env = "CTC_PRIOR")]
    pub prior: PathBuf,
    #[arg(long, env = "CTC_ACOUSTIC_SCALE", default_value_t = 1.0)]
    pub acoustic_scale: f64,
    /// Maximum active states per frame; 0 disables pruning.
    #[arg(long, env = "CTC_BEAM", default_value_t = ctc_core::wfst::decode::DEFAULT_MAX_ACTIVE)]
    pub beam: usize,
    /// Cost added per emitted word.
    #[arg(long, env = "CTC_WORD_INSERTION_PENALTY", default_value_t = 0.0, allow_negative_numbers = true)]
    pub word_insertion_penalty: f64,
}

#[derive(Args, Debug)]
pub struct TrainLm {
    /// One sentence per line.
    #[arg(long, env = "CTC_CORPUS")]
    pub corpus: PathBuf,
    #[arg(long, env = "CTC_ORDER")]
    pub order: Option<usize>,
    #[arg(long, env = "CTC_DISCOUNT", default_value_t = ctc_core::lm::ngram::DEFAULT_DISCOUNT)]
    pub discount: f64,
    #[arg(long, env = "CTC_OUT")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BuildGraph {
    #[arg(long, env = "CTC_ALPHABET")]
    pub alphabet: PathBuf,
    #[arg(long, env = "CTC_LEXICON")]
    pub lexicon: PathBuf,
    /// Word LM in ARPA format.
    #[arg(long, env = "CTC_ARPA")]
    pub arpa: PathBuf,
    #[arg(long, env = "CTC_OUT")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct Score {
    #[arg(long = "ref", env = "CTC_REF")]
    pub reference: PathBuf,
    #[arg(long, env = "CTC_HYP")]
    pub hyp: PathBuf,
    /// One word per line; enables the OOV column.
    #[arg(long, env = "CTC_VOCAB")]
    pub vocab: Option<PathBuf>,
    #[arg(long, env = "CTC_PER_UTT")]
    pub per_utt: bool,
    #[arg(long, env = "CTC_JSON")]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct ScoreSeq {
    #[arg(long, env = "CTC_POST")]
    pub post: PathBuf,
    #[arg(long, env = "CTC_ALPHABET")]
    pub alphabet: PathBuf,
    /// Transcription as whitespace-separated alphabet symbols.
    #[arg(long, env = "CTC_SYMBOLS")]
    pub symbols: String,
}

#[derive(Args, Debug)]
pub struct EstimatePriors {
    #[arg(long, env = "CTC_MANIFEST")]
    pub manifest: PathBuf,
    #[arg(long, env = "CTC_FLOOR", default_value_t = ctc_core::posterior::DEFAULT_PRIOR_FLOOR)]
    pub floor: f64,
    #[arg(long, env = "CTC_OUT")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct Demo {
    /// Also write the corpus, models and graph here, ready for the other subcommands.
    #[arg(long, env = "CTC_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    /// Example utterances printed under the table.
    #[arg(long, env = "CTC_EXAMPLES", default_value_t = 3)]
    pub examples: usize,
    #[arg(long, env = "CTC_JSON")]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct ServeCharlm {
    /// Character LM in ARPA format.
    #[arg(long, env = "CTC_CHARLM", conflicts_with = "uniform", required_unless_present = "uniform")]
    pub charlm: Option<PathBuf>,
    /// Serve a uniform model over this many symbols instead.
    #[arg(long, env = "CTC_UNIFORM")]
    pub uniform: Option<usize>,
}

fn exit_code(class: &str) -> u8 {
    match class {
        "usage" => 2,
        "io" => 3,
        "format" | "normalization" => 4,
        "invalid-input" => 5,
        "config" => 6,
        "capacity" => 7,
        "protocol" => 8,
        "unsupported" | "build" => 9,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error[usage]: {first}");
            return ExitCode::from(exit_code("usage"));
        }
    };
    env_logger::Builder::new()
        .filter_level(cli.log_level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.class(), e.to_string().replace('\n', " "));
            ExitCode::from(exit_code(e.class()))
        }
    }
}
