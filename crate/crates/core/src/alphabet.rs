//! Label alphabets with a reserved blank at index 0.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Reserved token for the CTC blank.
pub const BLANK_TOKEN: &str = "<blk>";
/// Reserved token for the word-separating space.
pub const SPACE_TOKEN: &str = "<sp>";
pub const BLANK: usize = 0;

/// How word boundaries are encoded in a transcription.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WordConvention {
    /// Words are separated by the space symbol.
    Space,
    /// A symbol whose first character is uppercase starts a new word.
    Case,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
    space_index: Option<usize>,
    convention: Option<WordConvention>,
}

impl Alphabet {
    /// Builds an alphabet from its ordered symbols. `symbols[0]` must be `<blk>`.
    ///
    /// If `<sp>` is present the space convention is selected automatically.
    pub fn new<S: Into<String>>(symbols: impl IntoIterator<Item = S>) -> Result<Self> {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        match symbols.first() {
            Some(s) if s == BLANK_TOKEN => {}
            Some(s) => {
                return Err(Error::format(
                    "line 1",
                    format!("first symbol must be {BLANK_TOKEN}, found {s:?}"),
                ))
            }
            None => return Err(Error::invalid("alphabet is empty")),
        }
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            if s.is_empty() {
                return Err(Error::format(format!("line {}", i + 1), "empty symbol"));
            }
            if s.chars().any(char::is_whitespace) {
                return Err(Error::format(
                    format!("line {}", i + 1),
                    format!("symbol {s:?} contains whitespace"),
                ));
            }
            if index.insert(s.clone(), i).is_some() {
                return Err(Error::DuplicateSymbol {
                    symbol: s.clone(),
                    line: i + 1,
                });
            }
        }
        let space_index = index.get(SPACE_TOKEN).copied();
        Ok(Self {
            symbols,
            index,
            space_index,
            convention: space_index.map(|_| WordConvention::Space),
        })
    }

    /// Convenience constructor: blank followed by one symbol per character of `chars`.
    pub fn from_chars(chars: &str) -> Result<Self> {
        let mut symbols = vec![BLANK_TOKEN.to_string()];
        symbols.extend(chars.chars().map(|c| {
            if c == ' ' {
                SPACE_TOKEN.to_string()
            } else {
                c.to_string()
            }
        }));
        Self::new(symbols)
    }

    pub fn with_convention(mut self, convention: WordConvention) -> Result<Self> {
        if convention == WordConvention::Space && self.space_index.is_none() {
            return Err(Error::Config(format!(
                "space convention requires a {SPACE_TOKEN} symbol"
            )));
        }
        self.convention = Some(convention);
        Ok(self)
    }

    pub fn without_convention(mut self) -> Self {
        self.convention = None;
        self
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn blank_index(&self) -> usize {
        BLANK
    }

    pub fn space_index(&self) -> Option<usize> {
        self.space_index
    }

    pub fn convention(&self) -> Option<WordConvention> {
        self.convention
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn symbol(&self, index: usize) -> Option<&str> {
        self.symbols.get(index).map(String::as_str)
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.index.get(symbol).copied()
    }

    /// Text form of a label: the space token renders as `' '`.
    pub fn render_symbol(&self, index: usize) -> &str {
        if Some(index) == self.space_index {
            " "
        } else {
            &self.symbols[index]
        }
    }

    /// Maps a label to the single character an external character LM sees.
    ///
    /// Multi-character symbols have no character form and map to `None`.
    pub fn char_of(&self, index: usize) -> Option<char> {
        if Some(index) == self.space_index {
            return Some(' ');
        }
        let mut chars = self.symbols.get(index)?.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) if index != BLANK => Some(c),
            _ => None,
        }
    }

    /// Parses whitespace-separated symbols into label indices.
    pub fn encode_symbols(&self, text: &str) -> Result<Vec<usize>> {
        text.split_whitespace()
            .map(|s| {
                self.index_of(s)
                    .ok_or_else(|| Error::invalid(format!("symbol {s:?} is not in the alphabet")))
            })
            .collect()
    }

    /// Maps each character of `text` to its label; `' '` maps to the space symbol.
    pub fn encode_chars(&self, text: &str) -> Result<Vec<usize>> {
        text.chars()
            .map(|c| {
                let found = if c == ' ' {
                    self.space_index
                } else {
                    self.index_of(c.encode_utf8(&mut [0; 4]))
                };
                found.ok_or_else(|| Error::invalid(format!("character {c:?} is not in the alphabet")))
            })
            .collect()
    }
}
