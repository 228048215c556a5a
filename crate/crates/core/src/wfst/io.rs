//! Binary graph files.
//!
//! Layout, all integers `u32` and all weights `f64`, little-endian:
//!
//! ```text
//! magic "CTCG"  version
//! input symbols:  count, then per symbol: byte length, UTF-8 bytes
//! output symbols: same layout
//! num_states  start (u32::MAX when there is none)
//! per state: final weight, arc count, then per arc: ilabel olabel weight next
//! ```
//!
//! Symbol tables include `<eps>` at label 0.

use std::path::Path as FsPath;

use super::fst::{Arc, StateId, SymbolTable, Wfst};
use super::semiring::Semiring;
use crate::error::{Error, Result};

pub const GRAPH_MAGIC: &[u8; 4] = b"CTCG";
pub const GRAPH_VERSION: u32 = 1;
const NO_START: u32 = u32::MAX;

pub fn encode_graph<W: Semiring>(fst: &Wfst<W>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(GRAPH_MAGIC);
    out.extend_from_slice(&GRAPH_VERSION.to_le_bytes());
    for table in [fst.input_symbols(), fst.output_symbols()] {
        out.extend_from_slice(&(table.len() as u32).to_le_bytes());
        for sym in table.symbols() {
            out.extend_from_slice(&(sym.len() as u32).to_le_bytes());
            out.extend_from_slice(sym.as_bytes());
        }
    }
    out.extend_from_slice(&(fst.num_states() as u32).to_le_bytes());
    out.extend_from_slice(&fst.start().unwrap_or(NO_START).to_le_bytes());
    for s in 0..fst.num_states() as StateId {
        out.extend_from_slice(&fst.final_weight(s).value().to_le_bytes());
        let arcs = fst.arcs(s);
        out.extend_from_slice(&(arcs.len() as u32).to_le_bytes());
        for a in arcs {
            out.extend_from_slice(&a.ilabel.to_le_bytes());
            out.extend_from_slice(&a.olabel.to_le_bytes());
            out.extend_from_slice(&a.weight.value().to_le_bytes());
            out.extend_from_slice(&a.next.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format(format!("byte {}", self.pos), format!("truncated {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn table(&mut self) -> Result<SymbolTable> {
        let at = self.pos;
        let n = self.u32("symbol count")?;
        let mut syms = Vec::new();
        for _ in 0..n {
            let len = self.u32("symbol length")? as usize;
            let sym_at = self.pos;
            let raw = self.take(len, "symbol")?;
            let sym = std::str::from_utf8(raw)
                .map_err(|_| Error::format(format!("byte {sym_at}"), "symbol is not UTF-8"))?;
            syms.push(sym.to_string());
        }
        if syms.first().map(String::as_str) != Some(super::fst::EPSILON_SYMBOL) {
            return Err(Error::format(format!("byte {at}"), "symbol table must start with <eps>"));
        }
        SymbolTable::from_symbols(&syms[1..]).map_err(|e| Error::format(format!("byte {at}"), e.to_string()))
    }
}

pub fn decode_graph<W: Semiring>(bytes: &[u8]) -> Result<Wfst<W>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "header")? != GRAPH_MAGIC {
        return Err(Error::format("byte 0", "bad magic, expected CTCG"));
    }
    let version = r.u32("header")?;
    if version != GRAPH_VERSION {
        return Err(Error::format("byte 4", format!("unsupported graph version {version}")));
    }
    let isyms = r.table()?;
    let osyms = r.table()?;
    let mut fst = Wfst::new(isyms, osyms);
    let states = r.u32("state count")?;
    let start_at = r.pos;
    let start = r.u32("start state")?;
    for _ in 0..states {
        fst.add_state();
    }
    for s in 0..states {
        let fw = r.f64("final weight")?;
        fst.set_final(s, W::from_value(fw));
        let n = r.u32("arc count")?;
        for _ in 0..n {
            let at = r.pos;
            let ilabel = r.u32("arc")?;
            let olabel = r.u32("arc")?;
            let weight = W::from_value(r.f64("arc")?);
            let next = r.u32("arc")?;
            fst.add_arc(s, Arc::new(ilabel, olabel, weight, next))
                .map_err(|e| Error::format(format!("byte {at}"), e.to_string()))?;
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::format(format!("byte {}", r.pos), "trailing bytes after graph"));
    }
    match start {
        NO_START => {}
        s if s < states => fst.set_start(s),
        s => return Err(Error::format(format!("byte {start_at}"), format!("start state {s} does not exist"))),
    }
    Ok(fst)
}

pub fn write_graph<W: Semiring>(path: impl AsRef<FsPath>, fst: &Wfst<W>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_graph(fst)).map_err(|e| Error::io(path, e))
}

pub fn read_graph<W: Semiring>(path: impl AsRef<FsPath>) -> Result<Wfst<W>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_graph(&bytes)
}
