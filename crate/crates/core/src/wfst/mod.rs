//! Weighted finite-state transducers: semirings, token/lexicon/grammar
//! builders, epsilon-filtered composition, graph files and Viterbi decoding.

pub mod build;
pub mod compose;
pub mod decode;
pub mod fst;
pub mod io;
pub mod semiring;

pub use build::{acoustic_table, build_grammar_fst, build_lexicon_fst, build_token_fst, grammar_table, unit_table};
pub use compose::compose;
pub use decode::{build_decoding_graph, decode_scores, wfst_decode, DecodeStatus, WfstConfig, WfstOutput};
pub use fst::{identity_acceptor, linear_acceptor, Arc, Label, StateId, SymbolTable, Wfst, EPSILON};
pub use io::{decode_graph, encode_graph, read_graph, write_graph};
pub use semiring::{LogWeight, Semiring, TropicalWeight};
