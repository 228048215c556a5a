//! File formats shared by every decoder.
//!
//! Posterior files are little-endian binary:
//!
//! | bytes | field                                     |
//! |-------|-------------------------------------------|
//! | 4     | magic `CTCP`                              |
//! | 4     | `u32` version (1)                         |
//! | 4     | `u32` frame count `T`                     |
//! | 4     | `u32` label count `K`                     |
//! | 4·T·K | `f32` natural-log probabilities, frame-major |
//!
//! Alphabet files list one symbol per line, `<blk>` first. Lexicon files hold
//! `WORD<TAB>unit unit ...` per line. Prior files hold one natural-log prior per line.

use std::fs;
use std::path::Path as FsPath;

use crate::alphabet::{Alphabet, BLANK};
use crate::error::{Error, Result};
use crate::float::LogFloat;
use crate::posterior::{PosteriorMatrix, PriorVector, FILE_TOLERANCE};

pub const POSTERIOR_MAGIC: &[u8; 4] = b"CTCP";
pub const POSTERIOR_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

pub fn encode_posteriors<F: LogFloat>(post: &PosteriorMatrix<F>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * post.values().len());
    out.extend_from_slice(POSTERIOR_MAGIC);
    out.extend_from_slice(&POSTERIOR_VERSION.to_le_bytes());
    out.extend_from_slice(&(post.frames() as u32).to_le_bytes());
    out.extend_from_slice(&(post.labels() as u32).to_le_bytes());
    for v in post.values() {
        out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
    out
}

fn read_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

pub fn decode_posteriors<F: LogFloat>(bytes: &[u8]) -> Result<PosteriorMatrix<F>> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(
            format!("byte {}", bytes.len()),
            "truncated header",
        ));
    }
    if &bytes[..4] != POSTERIOR_MAGIC {
        return Err(Error::format("byte 0", "bad magic, expected CTCP"));
    }
    let version = read_u32(bytes, 4);
    if version != POSTERIOR_VERSION {
        return Err(Error::format("byte 4", format!("unsupported version {version}")));
    }
    let frames = read_u32(bytes, 8) as usize;
    let labels = read_u32(bytes, 12) as usize;
    let expected = HEADER_LEN + 4 * frames * labels;
    if bytes.len() < expected {
        return Err(Error::format(
            format!("byte {}", bytes.len()),
            format!("truncated payload, expected {expected} bytes"),
        ));
    }
    if bytes.len() > expected {
        return Err(Error::format(
            format!("byte {expected}"),
            "trailing bytes after payload",
        ));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| F::of(f32::from_le_bytes(c.try_into().unwrap()) as f64))
        .collect();
    match PosteriorMatrix::from_log_probs_with_tolerance(frames, labels, values, FILE_TOLERANCE) {
        Err(Error::Normalization { frame, mass }) => Err(Error::format(
            format!("byte {}", HEADER_LEN + 4 * frame * labels),
            format!("frame {frame} is not normalized (probability mass {mass})"),
        )),
        other => other,
    }
}

pub fn read_posteriors<F: LogFloat>(path: impl AsRef<FsPath>) -> Result<PosteriorMatrix<F>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_posteriors(&bytes).map_err(|e| locate(path, e))
}

pub fn write_posteriors<F: LogFloat>(path: impl AsRef<FsPath>, post: &PosteriorMatrix<F>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_posteriors(post)).map_err(|e| Error::io(path, e))
}

fn locate(path: &FsPath, err: Error) -> Error {
    match err {
        Error::Format { location, message } => Error::Format {
            location: format!("{}:{location}", path.display()),
            message,
        },
        other => other,
    }
}

fn read_text(path: &FsPath) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn parse_alphabet(text: &str) -> Result<Alphabet> {
    let lines: Vec<&str> = text.lines().collect();
    match lines.first() {
        Some(&l) if l == crate::alphabet::BLANK_TOKEN => {}
        _ => {
            return Err(Error::format(
                "line 1",
                format!("first line must be exactly {}", crate::alphabet::BLANK_TOKEN),
            ))
        }
    }
    let symbols: Vec<&str> = match lines.iter().rposition(|l| !l.is_empty()) {
        Some(last) => lines[..=last].to_vec(),
        None => Vec::new(),
    };
    Alphabet::new(symbols)
}

pub fn read_alphabet(path: impl AsRef<FsPath>) -> Result<Alphabet> {
    let path = path.as_ref();
    parse_alphabet(&read_text(path)?).map_err(|e| locate(path, e))
}

pub fn format_alphabet(alphabet: &Alphabet) -> String {
    let mut out = String::new();
    for s in alphabet.symbols() {
        out.push_str(s);
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LexiconEntry {
    pub word: String,
    pub units: Vec<String>,
}

/// Word pronunciations; homophones and alternative pronunciations are separate entries.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Lexicon {
    pub entries: Vec<LexiconEntry>,
}

impl Lexicon {
    pub fn new(entries: Vec<LexiconEntry>) -> Self {
        Self { entries }
    }

    /// One entry per word, spelled character by character.
    pub fn spelled<S: AsRef<str>>(words: impl IntoIterator<Item = S>) -> Self {
        let entries = words
            .into_iter()
            .map(|w| LexiconEntry {
                word: w.as_ref().to_string(),
                units: w.as_ref().chars().map(String::from).collect(),
            })
            .collect();
        Self { entries }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Checks every unit against the non-blank part of the alphabet.
    pub fn validate(&self, alphabet: &Alphabet) -> Result<()> {
        for e in &self.entries {
            if e.units.is_empty() {
                return Err(Error::Build(format!("word {:?} has no units", e.word)));
            }
            for u in &e.units {
                match alphabet.index_of(u) {
                    Some(k) if k != BLANK => {}
                    _ => {
                        return Err(Error::Build(format!(
                            "word {:?} uses unit {u:?} which is not a non-blank alphabet symbol",
                            e.word
                        )))
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn parse_lexicon(text: &str) -> Result<Lexicon> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (word, units) = line
            .split_once('\t')
            .ok_or_else(|| Error::format(format!("line {}", i + 1), "expected WORD<TAB>units"))?;
        let units: Vec<String> = units.split_whitespace().map(String::from).collect();
        if word.is_empty() || units.is_empty() {
            return Err(Error::format(format!("line {}", i + 1), "empty word or unit list"));
        }
        entries.push(LexiconEntry {
            word: word.to_string(),
            units,
        });
    }
    Ok(Lexicon { entries })
}

pub fn read_lexicon(path: impl AsRef<FsPath>) -> Result<Lexicon> {
    let path = path.as_ref();
    parse_lexicon(&read_text(path)?).map_err(|e| locate(path, e))
}

pub fn format_lexicon(lexicon: &Lexicon) -> String {
    let mut out = String::new();
    for e in &lexicon.entries {
        out.push_str(&e.word);
        out.push('\t');
        out.push_str(&e.units.join(" "));
        out.push('\n');
    }
    out
}

pub fn format_priors<F: LogFloat>(prior: &PriorVector<F>) -> String {
    prior
        .log_probs()
        .iter()
        .map(|v| format!("{:?}\n", v.as_f64()))
        .collect()
}

pub fn parse_priors<F: LogFloat>(text: &str) -> Result<PriorVector<F>> {
    let values = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .map(F::of)
                .map_err(|e| Error::format(format!("line {}", i + 1), e.to_string()))
        })
        .collect::<Result<Vec<F>>>()?;
    PriorVector::from_log_probs(values)
}

pub fn read_priors<F: LogFloat>(path: impl AsRef<FsPath>) -> Result<PriorVector<F>> {
    let path = path.as_ref();
    parse_priors(&read_text(path)?).map_err(|e| locate(path, e))
}

/// Reads lines of `KEY<TAB>VALUE`, e.g. batch manifests and reference/hypothesis files.
pub fn parse_keyed_lines(text: &str) -> Result<Vec<(String, String)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let (k, v) = l.split_once('\t').unwrap_or((l, ""));
            if k.is_empty() {
                return Err(Error::format(format!("line {}", i + 1), "empty key"));
            }
            Ok((k.to_string(), v.to_string()))
        })
        .collect()
}

pub fn read_keyed_lines(path: impl AsRef<FsPath>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    parse_keyed_lines(&read_text(path)?).map_err(|e| locate(path, e))
}
