mod common;

use common::{all_sequences, check_alignment, edit_distance};
use ctc_core::score::{align, score_corpus};

/// Minimum over every monotone alignment, enumerated explicitly.
fn enumerate_min(r: &[&str], h: &[&str]) -> usize {
    match (r.split_first(), h.split_first()) {
        (None, _) => h.len(),
        (_, None) => r.len(),
        (Some((a, rr)), Some((b, hh))) => {
            let diag = usize::from(a != b) + enumerate_min(rr, hh);
            diag.min(1 + enumerate_min(rr, h)).min(1 + enumerate_min(r, hh))
        }
    }
}

#[test]
fn alignment_is_optimal_against_enumeration() {
    let seqs = all_sequences(&["x", "y", "z"], 4);
    for r in &seqs {
        for h in &seqs {
            let report = align(r, h);
            check_alignment(r, h, &report);
            assert_eq!(report.errors(), enumerate_min(r, h), "{r:?} / {h:?}");
        }
    }
}

#[test]
fn alignment_is_optimal_up_to_six_tokens() {
    let seqs = all_sequences(&["x", "y", "z"], 6);
    for r in &seqs {
        for h in &seqs {
            let report = align(r, h);
            assert_eq!(report.errors(), edit_distance(r, h), "{r:?} / {h:?}");
        }
    }
}

#[test]
fn renaming_tokens_changes_nothing() {
    let rename = |s: &[&str]| -> Vec<String> {
        s.iter().map(|t| match *t { "x" => "cat", "y" => "dog", _ => "emu" }.to_string()).collect()
    };
    for r in all_sequences(&["x", "y", "z"], 4) {
        for h in all_sequences(&["x", "z"], 4) {
            let a = align(&r, &h);
            let b = align(&rename(&r), &rename(&h));
            let counts = |x: &ctc_core::score::AlignmentReport| (x.correct, x.substitutions, x.deletions, x.insertions);
            assert_eq!(counts(&a), counts(&b));
            let ops: Vec<_> = a.pairs.iter().map(|p| p.op).collect();
            let ops_b: Vec<_> = b.pairs.iter().map(|p| p.op).collect();
            assert_eq!(ops, ops_b);
        }
    }
}

#[test]
fn swapping_sides_swaps_insertions_and_deletions() {
    for r in all_sequences(&["x", "y"], 5) {
        for h in all_sequences(&["x", "y"], 4) {
            let (a, b) = (align(&r, &h), align(&h, &r));
            assert_eq!(a.errors(), b.errors());
            assert_eq!(a.insertions as isize - a.deletions as isize, b.deletions as isize - b.insertions as isize);
        }
    }
}

#[test]
fn corpus_totals_are_sums_of_utterances() {
    let refs: Vec<(String, String)> = [("u1", "a b c"), ("u2", "d e"), ("u3", "")]
        .iter()
        .map(|(i, t)| (i.to_string(), t.to_string()))
        .collect();
    let hyps: Vec<(String, String)> = [("u2", "d x e"), ("u1", "a c"), ("u3", "q")]
        .iter()
        .map(|(i, t)| (i.to_string(), t.to_string()))
        .collect();
    let scored = score_corpus(&refs, &hyps).unwrap();
    assert_eq!(scored.total.n, 5);
    assert_eq!(scored.total.errors(), 3);
    assert_eq!(scored.utterances.iter().map(|u| u.report.errors()).sum::<usize>(), 3);
    assert!((scored.total.wer() - 0.6).abs() < 1e-12);
}
