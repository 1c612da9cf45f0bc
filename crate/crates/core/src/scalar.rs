//! Scalar traits the algebra is generic over.
//!
//! Exact oracles run on [`num_rational::BigRational`]; the fast layer path runs on
//! `f32`/`f64`.

use std::fmt::{Debug, Display};
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_traits::{Float, FromPrimitive, One, Zero};

/// Ring-like element: enough to build and multiply matrices.
pub trait Scalar:
    Clone
    + PartialEq
    + Debug
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
}

impl<T> Scalar for T where
    T: Clone
        + PartialEq
        + Debug
        + Zero
        + One
        + Add<Output = T>
        + Sub<Output = T>
        + Mul<Output = T>
        + Neg<Output = T>
        + Send
        + Sync
        + 'static
{
}

/// A scalar with exact division. Elimination over a `Field` never needs a tolerance.
pub trait Field: Scalar + Div<Output = Self> {}

impl Field for num_rational::BigRational {}
impl Field for num_rational::Rational64 {}

/// Floating point: f32 or f64.
pub trait Real: Scalar + Float + FromPrimitive + Display + Copy {
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(Self::nan)
    }
}

impl Real for f32 {}
impl Real for f64 {}
