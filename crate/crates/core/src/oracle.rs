//! Exact CTC quantities: path probability, the forward recursion over the
//! blank-interleaved label sequence, and brute-force enumeration of all paths.

use std::collections::BTreeMap;

use crate::alphabet::BLANK;
use crate::error::{Error, Result};
use crate::float::{log_add, LogFloat};
use crate::path::{squash_labels, Path, Transcription};
use crate::posterior::PosteriorMatrix;

/// Default number of path evaluations the enumerator accepts.
pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

/// `z` with a blank before, between and after every label (length `2U + 1`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AugmentedLabelSequence {
    source: Vec<usize>,
    augmented: Vec<usize>,
}

impl AugmentedLabelSequence {
    pub fn new(z: &Transcription) -> Self {
        let mut augmented = Vec::with_capacity(2 * z.len() + 1);
        augmented.push(BLANK);
        for &k in z.labels() {
            augmented.push(k);
            augmented.push(BLANK);
        }
        Self {
            source: z.labels().to_vec(),
            augmented,
        }
    }

    pub fn source(&self) -> &[usize] {
        &self.source
    }

    pub fn labels(&self) -> &[usize] {
        &self.augmented
    }

    pub fn len(&self) -> usize {
        self.augmented.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Whether position `s` may be entered directly from `s - 2`.
    fn can_skip(&self, s: usize) -> bool {
        s >= 2 && self.augmented[s] != BLANK && self.augmented[s] != self.augmented[s - 2]
    }
}

/// `Σ_t ln y[t][p_t]`.
pub fn path_probability<F: LogFloat>(path: &Path, post: &PosteriorMatrix<F>) -> Result<F> {
    if path.len() != post.frames() {
        return Err(Error::invalid(format!(
            "path has {} frames, posteriors have {}",
            path.len(),
            post.frames()
        )));
    }
    let mut total = F::zero();
    for (t, &k) in path.labels().iter().enumerate() {
        if k >= post.labels() {
            return Err(Error::invalid(format!("label {k} out of range at frame {t}")));
        }
        total = total + post.get(t, k);
    }
    Ok(total)
}

/// `ln P(z|X)` via the forward recursion. Impossible transcriptions give `-inf`.
pub fn sequence_probability_forward<F: LogFloat>(
    z: &Transcription,
    post: &PosteriorMatrix<F>,
) -> Result<F> {
    if let Some(&bad) = z.labels().iter().find(|&&k| k == BLANK || k >= post.labels()) {
        return Err(Error::invalid(format!("transcription label {bad} is invalid")));
    }
    let aug = AugmentedLabelSequence::new(z);
    let s_len = aug.len();
    let ninf = F::neg_infinity();
    let mut alpha = vec![ninf; s_len];
    alpha[0] = post.get(0, BLANK);
    if s_len > 1 {
        alpha[1] = post.get(0, aug.labels()[1]);
    }
    let mut next = vec![ninf; s_len];
    for t in 1..post.frames() {
        for s in 0..s_len {
            let mut acc = alpha[s];
            if s >= 1 {
                acc = log_add(acc, alpha[s - 1]);
            }
            if aug.can_skip(s) {
                acc = log_add(acc, alpha[s - 2]);
            }
            next[s] = acc + post.get(t, aug.labels()[s]);
        }
        std::mem::swap(&mut alpha, &mut next);
    }
    let last = alpha[s_len - 1];
    Ok(if s_len > 1 {
        log_add(last, alpha[s_len - 2])
    } else {
        last
    })
}

/// Best single path score `max_{p ∈ B⁻¹(z)} Σ_t scores[t][p_t]` over an arbitrary score function.
pub fn best_alignment_score<F: LogFloat>(
    z: &[usize],
    frames: usize,
    score: impl Fn(usize, usize) -> F,
) -> F {
    let aug = AugmentedLabelSequence::new(&Transcription(z.to_vec()));
    let s_len = aug.len();
    let ninf = F::neg_infinity();
    let max = |a: F, b: F| if b > a { b } else { a };
    let mut delta = vec![ninf; s_len];
    delta[0] = score(0, BLANK);
    if s_len > 1 {
        delta[1] = score(0, aug.labels()[1]);
    }
    let mut next = vec![ninf; s_len];
    for t in 1..frames {
        for s in 0..s_len {
            let mut acc = delta[s];
            if s >= 1 {
                acc = max(acc, delta[s - 1]);
            }
            if aug.can_skip(s) {
                acc = max(acc, delta[s - 2]);
            }
            next[s] = acc + score(t, aug.labels()[s]);
        }
        std::mem::swap(&mut delta, &mut next);
    }
    if s_len > 1 {
        max(delta[s_len - 1], delta[s_len - 2])
    } else {
        delta[0]
    }
}

fn check_cap(frames: usize, labels: usize, cap: u128) -> Result<()> {
    let required = (labels as u128).checked_pow(frames as u32).unwrap_or(u128::MAX);
    if required > cap {
        return Err(Error::Capacity { required, cap });
    }
    Ok(())
}

/// Visits every path in `L'^T` in lexicographic order.
pub fn for_each_path(frames: usize, labels: usize, mut visit: impl FnMut(&[usize])) {
    let mut path = vec![0usize; frames];
    loop {
        visit(&path);
        let mut i = frames;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            path[i] += 1;
            if path[i] < labels {
                break;
            }
            path[i] = 0;
        }
    }
}

/// Exact `ln P(z|X)` by enumerating every path; refuses when `K^T > cap`.
pub fn brute_force_sequence_probability<F: LogFloat>(
    z: &Transcription,
    post: &PosteriorMatrix<F>,
    cap: u128,
) -> Result<F> {
    check_cap(post.frames(), post.labels(), cap)?;
    let mut total = F::neg_infinity();
    for_each_path(post.frames(), post.labels(), |p| {
        if squash_labels(p) == z.labels() {
            let lp = p
                .iter()
                .enumerate()
                .fold(F::zero(), |acc, (t, &k)| acc + post.get(t, k));
            total = log_add(total, lp);
        }
    });
    Ok(total)
}

/// `ln P(z|X)` for every transcription reachable from some path, by enumeration.
pub fn brute_force_distribution<F: LogFloat>(
    post: &PosteriorMatrix<F>,
    cap: u128,
) -> Result<BTreeMap<Vec<usize>, F>> {
    check_cap(post.frames(), post.labels(), cap)?;
    let mut dist: BTreeMap<Vec<usize>, F> = BTreeMap::new();
    for_each_path(post.frames(), post.labels(), |p| {
        let lp = p
            .iter()
            .enumerate()
            .fold(F::zero(), |acc, (t, &k)| acc + post.get(t, k));
        let entry = dist.entry(squash_labels(p)).or_insert(F::neg_infinity());
        *entry = log_add(*entry, lp);
    });
    Ok(dist)
}

/// The most probable transcription by enumeration; ties go to the lexicographically smallest.
pub fn brute_force_argmax<F: LogFloat>(
    post: &PosteriorMatrix<F>,
    cap: u128,
) -> Result<(Transcription, F)> {
    let dist = brute_force_distribution(post, cap)?;
    let mut best: Option<(&Vec<usize>, F)> = None;
    for (z, &lp) in &dist {
        if best.is_none_or(|(_, b)| lp > b) {
            best = Some((z, lp));
        }
    }
    let (z, lp) = best.expect("at least one path exists");
    Ok((Transcription(z.clone()), lp))
}
