use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Scalar used for log-domain probabilities: `f32` or `f64`.
pub trait LogFloat:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; every implementor accepts every finite or infinite `f64`.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 converts to every LogFloat")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("LogFloat converts to f64")
    }
}

impl LogFloat for f32 {}
impl LogFloat for f64 {}

/// `ln(exp(a) + exp(b))` with `-inf` as the additive identity.
pub fn log_add<F: LogFloat>(a: F, b: F) -> F {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == F::neg_infinity() {
        return hi;
    }
    if hi == F::infinity() {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln Σ exp(x_i)`; empty input gives `-inf`.
pub fn log_sum_exp<F: LogFloat>(values: impl IntoIterator<Item = F>) -> F {
    let values: Vec<F> = values.into_iter().collect();
    let hi = values
        .iter()
        .copied()
        .fold(F::neg_infinity(), |m, v| if v > m { v } else { m });
    if hi == F::neg_infinity() || hi == F::infinity() {
        return hi;
    }
    let sum = values
        .iter()
        .fold(F::zero(), |acc, &v| acc + (v - hi).exp());
    hi + sum.ln()
}

/// Relative closeness for log-probabilities, treating equal infinities as equal.
pub fn log_close(a: f64, b: f64, rel: f64) -> bool {
    if a == b {
        return true;
    }
    if !a.is_finite() || !b.is_finite() {
        return false;
    }
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}
