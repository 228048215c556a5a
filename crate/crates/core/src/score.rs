//! Word error rates, insertion/substitution/deletion breakdowns, OOV counts
//! and side-by-side system comparisons.
//!
//! Scoring normalization is fixed: text is lowercased and split on whitespace.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EditOp {
    Correct,
    Substitution,
    Insertion,
    Deletion,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AlignedPair {
    pub reference: Option<String>,
    pub hypothesis: Option<String>,
    pub op: EditOp,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct AlignmentReport {
    /// Reference length.
    pub n: usize,
    pub insertions: usize,
    pub substitutions: usize,
    pub deletions: usize,
    pub correct: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub pairs: Vec<AlignedPair>,
}

impl AlignmentReport {
    pub fn errors(&self) -> usize {
        self.insertions + self.substitutions + self.deletions
    }

    /// `(I + S + D) / N`; an empty reference counts as length one.
    pub fn wer(&self) -> f64 {
        self.errors() as f64 / self.n.max(1) as f64
    }

    fn rate(&self, count: usize) -> f64 {
        count as f64 / self.n.max(1) as f64
    }

    pub fn insertion_rate(&self) -> f64 {
        self.rate(self.insertions)
    }

    pub fn substitution_rate(&self) -> f64 {
        self.rate(self.substitutions)
    }

    pub fn deletion_rate(&self) -> f64 {
        self.rate(self.deletions)
    }

    /// Adds another report's counts; aligned pairs are not carried over.
    pub fn accumulate(&mut self, other: &AlignmentReport) {
        self.n += other.n;
        self.insertions += other.insertions;
        self.substitutions += other.substitutions;
        self.deletions += other.deletions;
        self.correct += other.correct;
    }
}

/// Lowercases and splits on whitespace.
pub fn normalize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

/// Minimum edit distance alignment with unit costs.
///
/// Among optimal alignments, the one built left to right preferring a diagonal
/// step (match or substitution), then a deletion, then an insertion is returned.
pub fn align<S: AsRef<str>>(reference: &[S], hypothesis: &[S]) -> AlignmentReport {
    let (n, m) = (reference.len(), hypothesis.len());
    let eq = |i: usize, j: usize| reference[i].as_ref() == hypothesis[j].as_ref();
    // d[i][j]: distance between reference[i..] and hypothesis[j..]
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[m] = n - i;
    }
    for (j, cell) in d[n].iter_mut().enumerate() {
        *cell = m - j;
    }
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            let diag = d[i + 1][j + 1] + usize::from(!eq(i, j));
            d[i][j] = diag.min(d[i + 1][j] + 1).min(d[i][j + 1] + 1);
        }
    }

    let mut pairs = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (0, 0);
    while i < n || j < m {
        if i < n && j < m && d[i][j] == d[i + 1][j + 1] + usize::from(!eq(i, j)) {
            let op = if eq(i, j) { EditOp::Correct } else { EditOp::Substitution };
            pairs.push(AlignedPair {
                reference: Some(reference[i].as_ref().to_string()),
                hypothesis: Some(hypothesis[j].as_ref().to_string()),
                op,
            });
            i += 1;
            j += 1;
        } else if i < n && d[i][j] == d[i + 1][j] + 1 {
            pairs.push(AlignedPair {
                reference: Some(reference[i].as_ref().to_string()),
                hypothesis: None,
                op: EditOp::Deletion,
            });
            i += 1;
        } else {
            pairs.push(AlignedPair {
                reference: None,
                hypothesis: Some(hypothesis[j].as_ref().to_string()),
                op: EditOp::Insertion,
            });
            j += 1;
        }
    }

    let count = |op| pairs.iter().filter(|p| p.op == op).count();
    AlignmentReport {
        n,
        insertions: count(EditOp::Insertion),
        substitutions: count(EditOp::Substitution),
        deletions: count(EditOp::Deletion),
        correct: count(EditOp::Correct),
        pairs,
    }
}

/// Character-level alignment of two texts, spaces included.
pub fn align_chars(reference: &str, hypothesis: &str) -> AlignmentReport {
    let r: Vec<String> = reference.chars().map(String::from).collect();
    let h: Vec<String> = hypothesis.chars().map(String::from).collect();
    align(&r, &h)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct OovReport {
    pub count: usize,
    pub total: usize,
    pub rate: f64,
    /// Distinct out-of-vocabulary tokens, sorted.
    pub tokens: Vec<String>,
}

/// Hypothesis tokens missing from `vocabulary`; both sides are lowercased first.
pub fn oov_analysis<S: AsRef<str>>(hypothesis: &[S], vocabulary: &HashSet<String>) -> OovReport {
    let vocab: HashSet<String> = vocabulary.iter().map(|w| w.to_lowercase()).collect();
    let mut distinct = std::collections::BTreeSet::new();
    let mut count = 0;
    for tok in hypothesis {
        let t = tok.as_ref().to_lowercase();
        if !vocab.contains(&t) {
            count += 1;
            distinct.insert(t);
        }
    }
    let total = hypothesis.len();
    OovReport {
        count,
        total,
        rate: if total == 0 { 0.0 } else { count as f64 / total as f64 },
        tokens: distinct.into_iter().collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UtteranceScore {
    pub id: String,
    pub report: AlignmentReport,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CorpusScore {
    pub total: AlignmentReport,
    pub utterances: Vec<UtteranceScore>,
}

/// Scores `UTTID -> text` hypotheses against references, in reference order.
///
/// Every reference needs a hypothesis (possibly empty) and every hypothesis a reference.
pub fn score_corpus(references: &[(String, String)], hypotheses: &[(String, String)]) -> Result<CorpusScore> {
    let mut hyps: BTreeMap<&str, &str> = BTreeMap::new();
    for (id, text) in hypotheses {
        if hyps.insert(id, text).is_some() {
            return Err(Error::invalid(format!("duplicate hypothesis for utterance {id:?}")));
        }
    }
    let mut seen = HashSet::new();
    let mut out = CorpusScore::default();
    for (id, text) in references {
        if !seen.insert(id.as_str()) {
            return Err(Error::invalid(format!("duplicate reference for utterance {id:?}")));
        }
        let hyp = hyps
            .get(id.as_str())
            .ok_or_else(|| Error::invalid(format!("no hypothesis for utterance {id:?}")))?;
        let report = align(&normalize(text), &normalize(hyp));
        out.total.accumulate(&report);
        out.utterances.push(UtteranceScore { id: id.clone(), report });
    }
    if let Some(extra) = hyps.keys().find(|id| !seen.contains(*id)) {
        return Err(Error::invalid(format!("hypothesis {extra:?} has no reference")));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SystemRow {
    pub system: String,
    pub n: usize,
    pub wer: f64,
    pub insertion_rate: f64,
    pub substitution_rate: f64,
    pub deletion_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oov: Option<OovReport>,
}

/// The insertion bonus next to the LM's entropy, both in bits.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BonusDiagnostic {
    pub insertion_bonus: f64,
    pub log2_bonus: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lm_bpc: Option<f64>,
}

impl BonusDiagnostic {
    pub fn new(insertion_bonus: f64, lm_bpc: Option<f64>) -> Self {
        Self { insertion_bonus, log2_bonus: insertion_bonus.log2(), lm_bpc }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Comparison {
    pub systems: Vec<SystemRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bonus: Option<BonusDiagnostic>,
}

/// One row per system, in the order given.
pub fn compare_report(systems: &[(String, AlignmentReport, Option<OovReport>)]) -> Comparison {
    Comparison {
        systems: systems
            .iter()
            .map(|(name, r, oov)| SystemRow {
                system: name.clone(),
                n: r.n,
                wer: r.wer(),
                insertion_rate: r.insertion_rate(),
                substitution_rate: r.substitution_rate(),
                deletion_rate: r.deletion_rate(),
                oov: oov.clone(),
            })
            .collect(),
        bonus: None,
    }
}

impl Comparison {
    pub fn with_bonus(mut self, diagnostic: BonusDiagnostic) -> Self {
        self.bonus = Some(diagnostic);
        self
    }

    /// Fixed-width text table; percentages with two decimals.
    pub fn to_table(&self) -> String {
        let width = self.systems.iter().map(|s| s.system.len()).max().unwrap_or(0).max(6);
        let with_oov = self.systems.iter().any(|s| s.oov.is_some());
        let mut out = String::new();
        let _ = write!(out, "{:<width$}  {:>5}  {:>7}  {:>7}  {:>7}  {:>7}", "system", "N", "WER", "I", "S", "D");
        if with_oov {
            let _ = write!(out, "  {:>5}  {:>7}", "OOV", "OOV%");
        }
        out.push('\n');
        for s in &self.systems {
            let pct = |x: f64| format!("{:.2}%", 100.0 * x);
            let _ = write!(
                out,
                "{:<width$}  {:>5}  {:>7}  {:>7}  {:>7}  {:>7}",
                s.system,
                s.n,
                pct(s.wer),
                pct(s.insertion_rate),
                pct(s.substitution_rate),
                pct(s.deletion_rate)
            );
            if with_oov {
                match &s.oov {
                    Some(o) => {
                        let _ = write!(out, "  {:>5}  {:>7}", o.count, pct(o.rate));
                    }
                    None => {
                        let _ = write!(out, "  {:>5}  {:>7}", "-", "-");
                    }
                }
            }
            out.push('\n');
        }
        if let Some(b) = &self.bonus {
            let _ = write!(out, "insertion bonus {} -> log2(b) = {:.4} bits", b.insertion_bonus, b.log2_bonus);
            if let Some(bpc) = b.lm_bpc {
                let _ = write!(out, "; character LM entropy {bpc:.4} BPC");
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("comparison serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        normalize(s)
    }

    #[test]
    fn identity_and_substitution() {
        let r = align(&toks("a b c"), &toks("a b c"));
        assert_eq!((r.errors(), r.correct, r.wer()), (0, 3, 0.0));
        let r = align(&toks("a b c"), &toks("a x c"));
        assert_eq!((r.substitutions, r.insertions, r.deletions), (1, 0, 0));
        assert!((r.wer() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn police_officer() {
        let r = align(&toks("he is a police officer"), &toks("he's a police officer"));
        assert_eq!((r.substitutions, r.deletions, r.insertions, r.correct), (1, 1, 0, 3));
        assert!((r.wer() - 0.4).abs() < 1e-15);
        assert_eq!(r.pairs[0].op, EditOp::Substitution);
        assert_eq!(r.pairs[1].op, EditOp::Deletion);
    }

    #[test]
    fn empty_sides() {
        let e: Vec<String> = Vec::new();
        let r = align(&e, &toks("a b"));
        assert_eq!((r.insertions, r.n), (2, 0));
        assert_eq!(r.wer(), 2.0);
        let r = align(&toks("a b"), &e);
        assert_eq!(r.deletions, 2);
        assert_eq!(align(&e, &e).wer(), 0.0);
    }

    #[test]
    fn oov_counts() {
        let vocab: HashSet<String> = ["he", "is", "a"].iter().map(|s| s.to_string()).collect();
        let r = oov_analysis(&toks("he is a"), &vocab);
        assert_eq!((r.count, r.rate), (0, 0.0));
        let mut hyp: Vec<String> = vec!["he".into(); 98];
        hyp.push("boger".into());
        hyp.push("peppier".into());
        let r = oov_analysis(&hyp, &vocab);
        assert_eq!(r.count, 2);
        assert!((r.rate - 0.02).abs() < 1e-15);
        // case-boundary output is compared lowercased
        let r = oov_analysis(&["He", "Is", "Boger"], &vocab);
        assert_eq!(r.tokens, ["boger"]);
    }

    #[test]
    fn corpus_scoring() {
        let refs = vec![("u1".to_string(), "a b c".to_string()), ("u2".to_string(), "d e".to_string())];
        let hyps = vec![("u2".to_string(), "D".to_string()), ("u1".to_string(), "a x c".to_string())];
        let s = score_corpus(&refs, &hyps).unwrap();
        assert_eq!((s.total.n, s.total.substitutions, s.total.deletions), (5, 1, 1));
        assert_eq!(s.utterances[0].id, "u1");
        assert!(score_corpus(&refs, &hyps[..1]).is_err());
        let mut extra = hyps.clone();
        extra.push(("u3".into(), "z".into()));
        assert!(score_corpus(&refs, &extra).is_err());
    }

    #[test]
    fn comparison_rows() {
        let a = align(&toks("a b c d"), &toks("a b x"));
        let cmp = compare_report(&[("one".into(), a.clone(), None), ("two".into(), a.clone(), None)]);
        assert_eq!(cmp.systems[0].wer, a.wer());
        assert_eq!(cmp.systems[0].wer, cmp.systems[1].wer);
        let cmp = cmp.with_bonus(BonusDiagnostic::new(2.5, Some(1.37)));
        let table = cmp.to_table();
        assert!(table.contains("log2(b) = 1.3219"), "{table}");
        assert!(table.contains("50.00%"), "{table}");
        let json: serde_json::Value = serde_json::from_str(&cmp.to_json()).unwrap();
        assert_eq!(json["systems"][1]["system"], "two");
        assert!((json["bonus"]["log2_bonus"].as_f64().unwrap() - 2.5f64.log2()).abs() < 1e-15);
    }
}
