use std::fmt::Debug;

use crate::float::LogFloat;

/// A weight set with `plus`/`times`, their identities, and an annihilating zero.
pub trait Semiring: Copy + Debug + PartialEq + Send + Sync + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    fn plus(self, other: Self) -> Self;
    fn times(self, other: Self) -> Self;
    /// The stored cost, for serialization.
    fn value(self) -> f64;
    fn from_value(value: f64) -> Self;

    fn is_zero(self) -> bool {
        self == Self::zero()
    }
}

/// `(min, +)` over costs (negative log probabilities).
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct TropicalWeight<F>(pub F);

/// `(-ln(e^-a + e^-b), +)` over costs.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct LogWeight<F>(pub F);

impl<F: LogFloat> TropicalWeight<F> {
    pub fn new(cost: F) -> Self {
        Self(cost)
    }

    pub fn cost(self) -> F {
        self.0
    }
}

impl<F: LogFloat> LogWeight<F> {
    pub fn new(cost: F) -> Self {
        Self(cost)
    }

    pub fn cost(self) -> F {
        self.0
    }
}

impl<F: LogFloat> Semiring for TropicalWeight<F> {
    fn zero() -> Self {
        Self(F::infinity())
    }

    fn one() -> Self {
        Self(F::zero())
    }

    fn plus(self, other: Self) -> Self {
        if other.0 < self.0 {
            other
        } else {
            self
        }
    }

    fn times(self, other: Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        Self(self.0 + other.0)
    }

    fn value(self) -> f64 {
        self.0.as_f64()
    }

    fn from_value(value: f64) -> Self {
        Self(F::of(value))
    }
}

impl<F: LogFloat> Semiring for LogWeight<F> {
    fn zero() -> Self {
        Self(F::infinity())
    }

    fn one() -> Self {
        Self(F::zero())
    }

    fn plus(self, other: Self) -> Self {
        Self(-crate::float::log_add(-self.0, -other.0))
    }

    fn times(self, other: Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        Self(self.0 + other.0)
    }

    fn value(self) -> f64 {
        self.0.as_f64()
    }

    fn from_value(value: f64) -> Self {
        Self(F::of(value))
    }
}
