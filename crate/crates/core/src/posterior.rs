//! Per-frame posterior distributions, label priors and prior-scaled scores.

use crate::error::{Error, Result};
use crate::float::LogFloat;

/// Row-sum tolerance applied to posteriors read from disk (f32 storage).
pub const FILE_TOLERANCE: f64 = 1e-3;
/// Row-sum tolerance applied to freshly computed rows.
pub const STRICT_TOLERANCE: f64 = 1e-6;
/// Floor applied to estimated priors before renormalization.
pub const DEFAULT_PRIOR_FLOOR: f64 = 1e-8;

fn strict_tolerance<F: LogFloat>() -> f64 {
    STRICT_TOLERANCE.max(64.0 * F::epsilon().as_f64())
}

fn check_row<F: LogFloat>(frame: usize, row: &[F], tolerance: f64) -> Result<()> {
    let mut mass = 0.0;
    for &v in row {
        if v.is_nan() || v == F::infinity() {
            return Err(Error::invalid(format!(
                "frame {frame} contains a non-finite log-probability {v}"
            )));
        }
        mass += v.as_f64().exp();
    }
    if (mass - 1.0).abs() > tolerance {
        return Err(Error::Normalization { frame, mass });
    }
    Ok(())
}

/// `T x K` natural-log posteriors, frame-major. Every row is a distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorMatrix<F> {
    frames: usize,
    labels: usize,
    values: Vec<F>,
}

impl<F: LogFloat> PosteriorMatrix<F> {
    pub fn from_log_probs(frames: usize, labels: usize, values: Vec<F>) -> Result<Self> {
        Self::from_log_probs_with_tolerance(frames, labels, values, strict_tolerance::<F>())
    }

    pub fn from_log_probs_with_tolerance(
        frames: usize,
        labels: usize,
        values: Vec<F>,
        tolerance: f64,
    ) -> Result<Self> {
        if frames == 0 {
            return Err(Error::invalid("posterior matrix needs at least one frame"));
        }
        if labels == 0 {
            return Err(Error::invalid("posterior matrix needs at least one label"));
        }
        if values.len() != frames * labels {
            return Err(Error::invalid(format!(
                "expected {} values for {frames}x{labels}, got {}",
                frames * labels,
                values.len()
            )));
        }
        for (t, row) in values.chunks_exact(labels).enumerate() {
            check_row(t, row, tolerance)?;
        }
        Ok(Self {
            frames,
            labels,
            values,
        })
    }

    /// Builds from linear probabilities, one inner slice per frame.
    pub fn from_probs<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let labels = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * labels);
        for (t, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != labels {
                return Err(Error::invalid(format!(
                    "frame {t} has {} labels, expected {labels}",
                    row.len()
                )));
            }
            values.extend(row.iter().map(|&p| F::of(p.ln())));
        }
        Self::from_log_probs(rows.len(), labels, values)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    pub fn row(&self, t: usize) -> &[F] {
        &self.values[t * self.labels..(t + 1) * self.labels]
    }

    pub fn get(&self, t: usize, k: usize) -> F {
        self.values[t * self.labels + k]
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn rows(&self) -> impl Iterator<Item = &[F]> {
        self.values.chunks_exact(self.labels)
    }

    /// Converts to another scalar type; rows are re-checked at the file tolerance.
    pub fn cast<G: LogFloat>(&self) -> Result<PosteriorMatrix<G>> {
        let values = self.values.iter().map(|v| G::of(v.as_f64())).collect();
        PosteriorMatrix::from_log_probs_with_tolerance(self.frames, self.labels, values, FILE_TOLERANCE)
    }

    /// Returns a copy with `frame` (linear probabilities) appended.
    pub fn with_frame(&self, probs: &[f64]) -> Result<Self> {
        if probs.len() != self.labels {
            return Err(Error::invalid("appended frame has the wrong width"));
        }
        let mut values = self.values.clone();
        values.extend(probs.iter().map(|&p| F::of(p.ln())));
        Self::from_log_probs(self.frames + 1, self.labels, values)
    }

    /// Views the posteriors as a score matrix without modification.
    pub fn to_scores(&self) -> ScoreMatrix<F> {
        ScoreMatrix {
            frames: self.frames,
            labels: self.labels,
            values: self.values.clone(),
        }
    }
}

/// Unnormalized per-frame label scores (log domain), e.g. prior-scaled posteriors.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMatrix<F> {
    frames: usize,
    labels: usize,
    values: Vec<F>,
}

impl<F: LogFloat> ScoreMatrix<F> {
    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    pub fn get(&self, t: usize, k: usize) -> F {
        self.values[t * self.labels + k]
    }

    pub fn row(&self, t: usize) -> &[F] {
        &self.values[t * self.labels..(t + 1) * self.labels]
    }
}

/// Natural-log label priors `ln P(k)`, floored and normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorVector<F> {
    log_probs: Vec<F>,
}

impl<F: LogFloat> PriorVector<F> {
    /// Accepts log-priors whose exponentials sum to one within the file tolerance.
    pub fn from_log_probs(log_probs: Vec<F>) -> Result<Self> {
        if log_probs.is_empty() {
            return Err(Error::invalid("prior vector is empty"));
        }
        if let Some(bad) = log_probs.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("prior entry {bad} is not finite")));
        }
        let mass: f64 = log_probs.iter().map(|v| v.as_f64().exp()).sum();
        if (mass - 1.0).abs() > FILE_TOLERANCE {
            return Err(Error::invalid(format!("priors sum to {mass}, expected 1")));
        }
        Ok(Self { log_probs })
    }

    /// Floors linear probabilities at `floor` and renormalizes.
    pub fn from_probs(probs: &[f64], floor: f64) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("prior vector is empty"));
        }
        if floor.is_nan() || floor <= 0.0 {
            return Err(Error::invalid("prior floor must be positive"));
        }
        let floored: Vec<f64> = probs.iter().map(|&p| p.max(floor)).collect();
        let total: f64 = floored.iter().sum();
        Self::from_log_probs(floored.iter().map(|p| F::of((p / total).ln())).collect())
    }

    pub fn uniform(labels: usize) -> Result<Self> {
        Self::from_probs(&vec![1.0 / labels as f64; labels], DEFAULT_PRIOR_FLOOR)
    }

    pub fn len(&self) -> usize {
        self.log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }

    pub fn log_probs(&self) -> &[F] {
        &self.log_probs
    }
}

/// Divides posteriors by label priors: `ln P(k|X) - ln P(k)` per cell.
pub fn apply_prior_scaling<F: LogFloat>(
    post: &PosteriorMatrix<F>,
    prior: &PriorVector<F>,
) -> Result<ScoreMatrix<F>> {
    if post.labels() != prior.len() {
        return Err(Error::invalid(format!(
            "posterior has {} labels but prior has {}",
            post.labels(),
            prior.len()
        )));
    }
    let values = post
        .rows()
        .flat_map(|row| row.iter().zip(prior.log_probs()).map(|(&p, &q)| p - q))
        .collect();
    Ok(ScoreMatrix {
        frames: post.frames(),
        labels: post.labels(),
        values,
    })
}

/// Averages per-frame probability mass over every frame of every matrix.
pub fn estimate_priors<F: LogFloat>(
    posteriors: &[PosteriorMatrix<F>],
    floor: f64,
) -> Result<PriorVector<F>> {
    let first = posteriors
        .first()
        .ok_or_else(|| Error::invalid("prior estimation needs at least one posterior matrix"))?;
    let labels = first.labels();
    let mut sums = vec![0.0f64; labels];
    let mut frames = 0usize;
    for post in posteriors {
        if post.labels() != labels {
            return Err(Error::invalid("posterior matrices disagree on label count"));
        }
        for row in post.rows() {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v.as_f64().exp();
            }
            frames += 1;
        }
    }
    let mean: Vec<f64> = sums.iter().map(|s| s / frames as f64).collect();
    PriorVector::from_probs(&mean, floor)
}
