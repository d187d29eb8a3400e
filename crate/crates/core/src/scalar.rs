//! Scalar abstraction shared by the geometry and loss kernels.
//!
//! Every numeric kernel that must be differentiable is written against
//! [`Real`] so that the same code evaluates on plain `f64` and on the
//! dual numbers from [`crate::grad`]. Constants enter through
//! `Real::from_f64` and carry no derivative.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Field operations plus the elementary functions used by the box kernels.
///
/// `max`/`min` break ties toward the first argument; for dual numbers this
/// fixes the subgradient at kinks so repeated evaluations are deterministic.
pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(x: f64) -> Self;

    /// The underlying value (the real part for dual numbers).
    fn value(self) -> f64;

    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;

    /// Four-quadrant arctangent of `self / x`.
    fn atan2(self, x: Self) -> Self;

    /// `self` if `self.value() >= other.value()`, else `other`.
    fn max(self, other: Self) -> Self {
        if self.value() >= other.value() {
            self
        } else {
            other
        }
    }

    /// `self` if `self.value() <= other.value()`, else `other`.
    fn min(self, other: Self) -> Self {
        if self.value() <= other.value() {
            self
        } else {
            other
        }
    }
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }

    fn value(self) -> f64 {
        self
    }

    fn exp(self) -> Self {
        f64::exp(self)
    }

    fn ln(self) -> Self {
        f64::ln(self)
    }

    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }

    fn abs(self) -> Self {
        f64::abs(self)
    }

    fn sin(self) -> Self {
        f64::sin(self)
    }

    fn cos(self) -> Self {
        f64::cos(self)
    }

    fn atan2(self, x: Self) -> Self {
        f64::atan2(self, x)
    }
}
