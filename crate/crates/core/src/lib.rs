//! Decoding toolkit for CTC acoustic-model posteriors.
//!
//! Given per-frame label posteriors this crate produces transcriptions with
//! greedy best-path search ([`greedy`]), character-LM-fused prefix beam search
//! ([`beam`]) and WFST Viterbi search with a word n-gram LM ([`wfst`]). Exact
//! oracles ([`oracle`]) and WER tooling ([`score`]) sit alongside.
//!
//! Numeric code is generic over [`LogFloat`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common cases.

pub mod alphabet;
pub mod beam;
pub mod demo;
pub mod error;
pub mod float;
pub mod greedy;
pub mod io;
pub mod lm;
pub mod oracle;
pub mod path;
pub mod posterior;
pub mod score;
pub mod wfst;

pub use alphabet::{Alphabet, WordConvention};
pub use error::{Error, Result};
pub use float::{log_add, log_sum_exp, LogFloat};
pub use path::{squash, Path, Transcription};
pub use posterior::{apply_prior_scaling, estimate_priors, PosteriorMatrix, PriorVector, ScoreMatrix};

pub type Posteriors = PosteriorMatrix<f64>;
pub type Posteriors32 = PosteriorMatrix<f32>;
pub type Priors = PriorVector<f64>;
pub type Priors32 = PriorVector<f32>;
pub type Scores = ScoreMatrix<f64>;
pub type Tropical = wfst::TropicalWeight<f64>;
pub type Tropical32 = wfst::TropicalWeight<f32>;
pub type LogWeight = wfst::LogWeight<f64>;
pub type Graph = wfst::Wfst<Tropical>;
