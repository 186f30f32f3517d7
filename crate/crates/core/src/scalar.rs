//! Numeric field abstraction for the linear-algebra based solvers.
//!
//! Decision procedures run over [`crate::Rational`]; the float impls exist for
//! quick estimates and for comparing against the exact path.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, Signed, ToPrimitive, Zero};

use crate::model::Prob;

pub trait Scalar: Num + Signed + Clone + PartialOrd + Debug + Send + Sync {
    fn from_int(v: i64) -> Self;

    fn from_prob(p: Prob) -> Self;

    /// Slack used when comparing for strict improvement. Zero for exact types.
    fn tolerance() -> Self;

    fn to_f64(&self) -> f64;

    /// `self > other` beyond the tolerance.
    fn exceeds(&self, other: &Self) -> bool {
        self.clone() - other.clone() > Self::tolerance()
    }

    fn approx_eq(&self, other: &Self) -> bool {
        (self.clone() - other.clone()).abs() <= Self::tolerance()
    }
}

impl Scalar for BigRational {
    fn from_int(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }

    fn from_prob(p: Prob) -> Self {
        BigRational::new(BigInt::from(p.numer()), BigInt::from(p.denom()))
    }

    fn tolerance() -> Self {
        BigRational::zero()
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn from_int(v: i64) -> Self {
        v as f64
    }

    fn from_prob(p: Prob) -> Self {
        p.numer() as f64 / p.denom() as f64
    }

    fn tolerance() -> Self {
        1e-9
    }

    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for f32 {
    fn from_int(v: i64) -> Self {
        v as f32
    }

    fn from_prob(p: Prob) -> Self {
        p.numer() as f32 / p.denom() as f32
    }

    fn tolerance() -> Self {
        1e-4
    }

    fn to_f64(&self) -> f64 {
        *self as f64
    }
}
