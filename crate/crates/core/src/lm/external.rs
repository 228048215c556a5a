//! Line protocol for character LMs running in another process.
//!
//! Requests and responses are single UTF-8 lines:
//!
//! ```text
//! INIT <alphabet-size>            -> OK <state0-id>
//! SCORE <state-id> <codepoint-hex> -> OK <log10-prob> <next-state-id>
//! FREE <state-id>                 -> OK
//! ```
//!
//! Any `ERR <msg>` response aborts the session.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use super::charlm::CharLm;
use crate::error::{Error, Result};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Client side of a session with an external character LM.
pub struct ExternalLm {
    writer: Box<dyn Write + Send>,
    responses: Receiver<std::io::Result<String>>,
    child: Option<Child>,
    timeout: Duration,
    live: HashSet<u64>,
    initial: Option<u64>,
    alphabet_size: usize,
    failed: bool,
}

impl std::fmt::Debug for ExternalLm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalLm")
            .field("live", &self.live.len())
            .field("alphabet_size", &self.alphabet_size)
            .finish()
    }
}

impl ExternalLm {
    /// Starts `command` (whitespace-separated program and arguments) and opens a session.
    pub fn spawn(command: &str, alphabet_size: usize, timeout: Duration) -> Result<Self> {
        let mut parts = command.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| Error::Config("external LM command is empty".into()))?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Protocol(format!("cannot start {program:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut lm = Self::connect(stdout, stdin, alphabet_size, timeout)?;
        lm.child = Some(child);
        Ok(lm)
    }

    /// Opens a session over an arbitrary byte stream pair.
    pub fn from_io<R, W>(reader: R, writer: W, alphabet_size: usize, timeout: Duration) -> Result<Self>
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        Self::connect(reader, writer, alphabet_size, timeout)
    }

    fn connect<R, W>(reader: R, writer: W, alphabet_size: usize, timeout: Duration) -> Result<Self>
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(reader).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        Ok(Self {
            writer: Box::new(writer),
            responses: rx,
            child: None,
            timeout,
            live: HashSet::new(),
            initial: None,
            alphabet_size,
            failed: false,
        })
    }

    /// Number of state handles the session currently owns.
    pub fn live_handles(&self) -> usize {
        self.live.len()
    }

    fn request(&mut self, message: &str) -> Result<Vec<String>> {
        if self.failed {
            return Err(Error::Protocol("session already aborted".into()));
        }
        let result = self.exchange(message);
        if result.is_err() {
            self.failed = true;
        }
        result
    }

    fn exchange(&mut self, message: &str) -> Result<Vec<String>> {
        writeln!(self.writer, "{message}")
            .and_then(|_| self.writer.flush())
            .map_err(|e| Error::Protocol(format!("cannot send {message:?}: {e}")))?;
        let line = match self.responses.recv_timeout(self.timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => return Err(Error::Protocol(format!("read failed after {message:?}: {e}"))),
            Err(RecvTimeoutError::Timeout) => {
                return Err(Error::Protocol(format!("timed out waiting for reply to {message:?}")))
            }
            Err(RecvTimeoutError::Disconnected) => {
                return Err(Error::Protocol(format!("LM process closed its output after {message:?}")))
            }
        };
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("OK") => Ok(fields.map(String::from).collect()),
            Some("ERR") => Err(Error::Protocol(format!("LM reported error for {message:?}: {line:?}"))),
            _ => Err(Error::Protocol(format!("malformed response line {line:?} to {message:?}"))),
        }
    }

    fn parse_handle(&self, field: Option<&String>, line: &[String], message: &str) -> Result<u64> {
        field
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| Error::Protocol(format!("malformed response line {:?} to {message:?}", line.join(" "))))
    }

    /// Releases one state handle.
    pub fn free(&mut self, state: u64) -> Result<()> {
        if !self.live.remove(&state) {
            return Ok(());
        }
        let message = format!("FREE {state}");
        let reply = self.request(&message)?;
        if !reply.is_empty() {
            return Err(Error::Protocol(format!("malformed response line {:?} to {message:?}", reply.join(" "))));
        }
        if self.initial == Some(state) {
            self.initial = None;
        }
        Ok(())
    }

    /// Frees every outstanding handle and shuts the LM down.
    pub fn close(mut self) -> Result<()> {
        let mut handles: Vec<u64> = self.live.iter().copied().collect();
        handles.sort_unstable();
        for h in handles {
            self.free(h)?;
        }
        self.shutdown()
    }

    fn shutdown(&mut self) -> Result<()> {
        self.writer = Box::new(std::io::sink());
        if let Some(mut child) = self.child.take() {
            let status = child
                .wait()
                .map_err(|e| Error::Protocol(format!("waiting for LM process: {e}")))?;
            if !status.success() {
                return Err(Error::Protocol(format!("LM process exited with {status}")));
            }
        }
        Ok(())
    }
}

impl Drop for ExternalLm {
    fn drop(&mut self) {
        if let Some(mut child) = self.child.take() {
            self.writer = Box::new(std::io::sink());
            if self.failed {
                let _ = child.kill();
            }
            let _ = child.wait();
        }
    }
}

impl CharLm for ExternalLm {
    type State = u64;

    fn initial_state(&mut self) -> Result<u64> {
        if let Some(s) = self.initial {
            return Ok(s);
        }
        let message = format!("INIT {}", self.alphabet_size);
        let reply = self.request(&message)?;
        if reply.len() != 1 {
            return Err(Error::Protocol(format!("malformed response line {:?} to {message:?}", reply.join(" "))));
        }
        let state = self.parse_handle(reply.first(), &reply, &message)?;
        self.live.insert(state);
        self.initial = Some(state);
        Ok(state)
    }

    fn score(&mut self, state: &u64, c: char) -> Result<(f64, u64)> {
        let message = format!("SCORE {state} {:x}", c as u32);
        let reply = self.request(&message)?;
        let log10: Option<f64> = reply.first().and_then(|f| f.parse().ok());
        match (reply.len(), log10) {
            (2, Some(lp)) if lp <= 0.0 => {
                let next = self.parse_handle(reply.get(1), &reply, &message)?;
                self.live.insert(next);
                Ok((lp * std::f64::consts::LN_10, next))
            }
            _ => {
                self.failed = true;
                Err(Error::Protocol(format!(
                    "malformed response line {:?} to {message:?}",
                    format!("OK {}", reply.join(" "))
                )))
            }
        }
    }

    fn knows(&self, _c: char) -> bool {
        true
    }
}

/// Server statistics reported when the input stream ends.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ServeStats {
    pub requests: usize,
    pub handles_allocated: u64,
    pub handles_live: usize,
}

/// Answers protocol requests on `input` using `lm` until end of input.
///
/// Every `INIT` and `SCORE` allocates a fresh handle; `FREE` releases it.
pub fn serve_char_lm<L: CharLm>(lm: &mut L, input: impl BufRead, mut output: impl Write) -> Result<ServeStats> {
    let mut states: HashMap<u64, L::State> = HashMap::new();
    let mut stats = ServeStats::default();
    let io_err = |e: std::io::Error| Error::Protocol(format!("serve: {e}"));
    for line in input.lines() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        stats.requests += 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        let reply = match fields.as_slice() {
            ["INIT", size] if size.parse::<usize>().is_ok() => {
                let id = stats.handles_allocated;
                stats.handles_allocated += 1;
                states.insert(id, lm.initial_state()?);
                format!("OK {id}")
            }
            ["SCORE", id, hex] => {
                let state = id.parse::<u64>().ok().and_then(|id| states.get(&id)).cloned();
                let c = u32::from_str_radix(hex, 16).ok().and_then(char::from_u32);
                match (state, c) {
                    (Some(state), Some(c)) => {
                        let (lp, next) = lm.score(&state, c)?;
                        let id = stats.handles_allocated;
                        stats.handles_allocated += 1;
                        states.insert(id, next);
                        format!("OK {:?} {id}", lp / std::f64::consts::LN_10)
                    }
                    (None, _) => format!("ERR unknown state {id}"),
                    (_, None) => format!("ERR bad codepoint {hex}"),
                }
            }
            ["FREE", id] => match id.parse::<u64>().ok().and_then(|id| states.remove(&id)) {
                Some(_) => "OK".to_string(),
                None => format!("ERR unknown state {id}"),
            },
            _ => format!("ERR malformed request {line:?}"),
        };
        writeln!(output, "{reply}").and_then(|_| output.flush()).map_err(io_err)?;
    }
    stats.handles_live = states.len();
    Ok(stats)
}
