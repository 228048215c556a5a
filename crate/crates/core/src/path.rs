//! Frame-level paths, label-level transcriptions and the squash map between them.

use crate::alphabet::{Alphabet, BLANK};
use crate::error::{Error, Result};

/// One label per frame, blanks included.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Path(pub Vec<usize>);

/// Blank-free label sequence.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Transcription(pub Vec<usize>);

impl Path {
    pub fn labels(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Transcription {
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        if labels.contains(&BLANK) {
            return Err(Error::invalid("transcription contains the blank label"));
        }
        Ok(Self(labels))
    }

    pub fn labels(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Concatenated text, with the space symbol rendered as `' '`.
    pub fn render(&self, alphabet: &Alphabet) -> String {
        self.0.iter().map(|&k| alphabet.render_symbol(k)).collect()
    }
}

/// Removes blanks and collapses runs of repeated labels; labels separated by a blank stay distinct.
pub fn squash_labels(labels: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = BLANK;
    for &k in labels {
        if k != BLANK && k != prev {
            out.push(k);
        }
        prev = k;
    }
    out
}

pub fn squash(path: &Path, alphabet: &Alphabet) -> Result<Transcription> {
    if let Some(&bad) = path.0.iter().find(|&&k| k >= alphabet.len()) {
        return Err(Error::invalid(format!(
            "label {bad} is outside an alphabet of size {}",
            alphabet.len()
        )));
    }
    Ok(Transcription(squash_labels(&path.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // reference: two explicit passes, collapse first then drop blanks
    fn squash_reference(p: &[usize]) -> Vec<usize> {
        let mut collapsed: Vec<usize> = Vec::new();
        for &k in p {
            if collapsed.last() != Some(&k) {
                collapsed.push(k);
            }
        }
        collapsed.into_iter().filter(|&k| k != BLANK).collect()
    }

    #[test]
    fn squash_examples() {
        let ab = Alphabet::from_chars("AB").unwrap();
        let (a, b) = (1, 2);
        let p = Path(vec![a, a, BLANK, a, a, a, b, b]);
        assert_eq!(squash(&p, &ab).unwrap().0, vec![a, a, b]);
        assert_eq!(squash(&Path(vec![0, 0, 0]), &ab).unwrap().0, Vec::<usize>::new());
        let p = Path(vec![a, BLANK, a, b, b]);
        assert_eq!(squash(&p, &ab).unwrap().0, vec![a, a, b]);
        assert_eq!(squash_reference(&p.0), vec![a, a, b]);
    }

    #[test]
    fn out_of_range_label() {
        let ab = Alphabet::from_chars("AB").unwrap();
        assert!(matches!(squash(&Path(vec![0, 3]), &ab), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn render_uses_space() {
        let a = Alphabet::from_chars("ab ").unwrap();
        assert_eq!(Transcription(vec![1, 3, 2]).render(&a), "a b");
        assert!(Transcription::new(vec![1, 0]).is_err());
    }

    proptest! {
        #[test]
        fn matches_reference(p in proptest::collection::vec(0usize..4, 0..12)) {
            prop_assert_eq!(squash_labels(&p), squash_reference(&p));
        }

        #[test]
        fn idempotent_and_blank_free(p in proptest::collection::vec(0usize..4, 0..12)) {
            let z = squash_labels(&p);
            prop_assert!(!z.contains(&BLANK));
            let has_repeat = z.windows(2).any(|w| w[0] == w[1]);
            if !has_repeat {
                prop_assert_eq!(squash_labels(&z), z.clone());
            }
            let twice = squash_labels(&z);
            prop_assert_eq!(squash_labels(&twice), twice.clone());
        }

        #[test]
        fn adjacent_repeats_need_blank(p in proptest::collection::vec(0usize..3, 0..12)) {
            let z = squash_labels(&p);
            let repeats = z.windows(2).filter(|w| w[0] == w[1]).count();
            let separated = p
                .split(|&k| k == BLANK)
                .filter(|s| !s.is_empty())
                .collect::<Vec<_>>()
                .windows(2)
                .filter(|w| w[0].last() == w[1].first())
                .count();
            prop_assert_eq!(repeats, separated);
        }
    }
}
