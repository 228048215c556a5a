//! N-gram language models at character and word level, the ARPA format, and
//! the external character-LM protocol.

pub mod arpa;
pub mod charlm;
pub mod external;
pub mod ngram;
pub mod wordlm;

pub use arpa::{format_arpa, parse_arpa, read_arpa, write_arpa};
pub use charlm::{bits_per_character, train_char_ngram, CharLm, CharNGram, UniformCharLm};
pub use external::{serve_char_lm, ExternalLm};
pub use ngram::{KneserNeyConfig, NGramEntry, NGramLm, TokenId};
pub use wordlm::{perplexity, train_word_ngram, word_score};
