//! ARPA text format for backoff n-gram models.
//!
//! Log10 values are written with seven decimal places; entries within a
//! section are sorted by their token strings so output is reproducible.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::ngram::{NGramEntry, NGramLm};
use crate::error::{Error, Result};

pub const ARPA_DECIMALS: usize = 7;

pub fn format_arpa(lm: &NGramLm) -> String {
    let mut out = String::new();
    out.push_str("\n\\data\\\n");
    for k in 1..=lm.order() {
        writeln!(out, "ngram {k}={}", lm.count(k)).unwrap();
    }
    for k in 1..=lm.order() {
        writeln!(out, "\n\\{k}-grams:").unwrap();
        let mut rows: Vec<(Vec<&str>, &NGramEntry)> = lm
            .grams(k)
            .map(|(g, e)| (g.iter().map(|&id| lm.token(id)).collect(), e))
            .collect();
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        for (words, e) in rows {
            write!(out, "{:.*}\t{}", ARPA_DECIMALS, e.log10_prob, words.join(" ")).unwrap();
            if let Some(bo) = e.backoff {
                write!(out, "\t{:.*}", ARPA_DECIMALS, bo).unwrap();
            }
            out.push('\n');
        }
    }
    out.push_str("\n\\end\\\n");
    out
}

pub fn write_arpa(path: impl AsRef<Path>, lm: &NGramLm) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_arpa(lm)).map_err(|e| Error::io(path, e))
}

pub fn read_arpa(path: impl AsRef<Path>) -> Result<NGramLm> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_arpa(&text).map_err(|e| match e {
        Error::Format { location, message } => Error::Format {
            location: format!("{}:{location}", path.display()),
            message,
        },
        other => other,
    })
}

fn parse_number(field: &str, line: usize) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| Error::format(format!("line {line}"), format!("non-numeric field {field:?}")))
}

pub fn parse_arpa(text: &str) -> Result<NGramLm> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let at = |n: usize| format!("line {n}");

    // skip anything before \data\
    let mut last_line = 0;
    loop {
        match lines.next() {
            Some((_, "\\data\\")) => break,
            Some((n, _)) => last_line = n,
            None => return Err(Error::format(at(last_line + 1), "missing \\data\\ header")),
        }
    }

    let mut declared: Vec<usize> = Vec::new();
    let mut pending = None;
    for (n, line) in lines.by_ref() {
        last_line = n;
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("ngram ") {
            let (k, c) = rest
                .split_once('=')
                .ok_or_else(|| Error::format(at(n), "expected `ngram N=count`"))?;
            let k: usize = k.trim().parse().map_err(|_| Error::format(at(n), "bad n-gram order"))?;
            let c: usize = c.trim().parse().map_err(|_| Error::format(at(n), "bad n-gram count"))?;
            if k != declared.len() + 1 {
                return Err(Error::format(at(n), format!("expected ngram {} next", declared.len() + 1)));
            }
            declared.push(c);
        } else {
            pending = Some((n, line));
            break;
        }
    }
    if declared.is_empty() {
        return Err(Error::format(at(last_line), "no n-gram counts declared"));
    }

    let order = declared.len();
    let mut tables: Vec<Vec<(Vec<String>, NGramEntry)>> = vec![Vec::new(); order];
    let mut section: Option<(usize, usize)> = None; // (order, header line)
    let mut ended = false;
    let close_section = |section: Option<(usize, usize)>, tables: &Vec<Vec<_>>| -> Result<()> {
        if let Some((k, header)) = section {
            let found = tables[k - 1].len();
            if found != declared[k - 1] {
                return Err(Error::format(
                    at(header),
                    format!("ngram {k}={} declared but {found} entries listed", declared[k - 1]),
                ));
            }
        }
        Ok(())
    };
    let mut seen_sections = 0;
    for (n, line) in pending.into_iter().chain(lines) {
        last_line = n;
        if line.is_empty() {
            continue;
        }
        if ended {
            return Err(Error::format(at(n), "content after \\end\\"));
        }
        if line == "\\end\\" {
            close_section(section.take(), &tables)?;
            ended = true;
            continue;
        }
        if let Some(k) = line.strip_prefix('\\').and_then(|l| l.strip_suffix("-grams:")) {
            close_section(section.take(), &tables)?;
            let k: usize = k.parse().map_err(|_| Error::format(at(n), "bad section header"))?;
            if k != seen_sections + 1 || k > order {
                return Err(Error::format(at(n), format!("unexpected section \\{k}-grams:")));
            }
            seen_sections = k;
            section = Some((k, n));
            continue;
        }
        let (k, _) = section.ok_or_else(|| Error::format(at(n), "entry outside any section"))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        let backoff = match fields.len() {
            len if len == k + 1 => None,
            len if len == k + 2 && k < order => Some(parse_number(fields[k + 1], n)?),
            len => {
                return Err(Error::format(
                    at(n),
                    format!("{k}-gram entry has {len} fields"),
                ))
            }
        };
        let log10_prob = parse_number(fields[0], n)?;
        if log10_prob > 0.0 {
            return Err(Error::format(at(n), "log10 probability above zero"));
        }
        let words = fields[1..=k].iter().map(|w| w.to_string()).collect();
        tables[k - 1].push((words, NGramEntry { log10_prob, backoff }));
    }
    if !ended {
        return Err(Error::format(at(last_line), "missing \\end\\"));
    }
    if seen_sections != order {
        return Err(Error::format(at(last_line), format!("missing \\{}-grams: section", seen_sections + 1)));
    }
    if tables[0].is_empty() {
        return Err(Error::format(at(last_line), "model has no unigrams"));
    }
    NGramLm::from_tables(order, tables).map_err(|e| match e {
        Error::InvalidInput(m) => Error::format(at(last_line), m),
        other => other,
    })
}
