//! Scalar abstraction shared by plain `f64` evaluation and tape-recorded
//! differentiable evaluation.
//!
//! Problem definitions, trial solutions and losses are written once against
//! [`Scalar`] and then run either on raw floats (metrics, oracles, finite
//! differences) or on [`crate::diff::Var`] (gradient-based training). Both
//! implementations use the same floating-point expressions, so the two routes
//! agree bitwise on values.

use std::ops::{Add, Mul, Neg, Sub};

pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    /// Current numeric value (identity for `f64`).
    fn value(self) -> f64;

    fn sq(self) -> Self;

    /// Logistic sigmoid σ(x) = 1 / (1 + e^{−x}).
    fn sigmoid(self) -> Self;

    /// σ′ expressed through the activation: given s = σ(z), returns s(1 − s).
    fn sigmoid_prime(self) -> Self;
}

impl Scalar for f64 {
    fn value(self) -> f64 {
        self
    }

    fn sq(self) -> f64 {
        self * self
    }

    fn sigmoid(self) -> f64 {
        1.0 / (1.0 + (-self).exp())
    }

    fn sigmoid_prime(self) -> f64 {
        self * (1.0 - self)
    }
}

/// A zero of the same scalar kind as `like` (a constant on the tape).
pub fn zero_like<S: Scalar>(like: S) -> S {
    like * 0.0
}
