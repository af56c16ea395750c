//! Scalar abstractions.
//!
//! [`Scalar`] covers everything the exact parts of the crate need (ordered
//! field arithmetic with an absolute value), so the sparsification operator
//! and its enumeration oracle also run over exact rationals. [`Real`] adds the
//! transcendental functions needed by losses, step sizes and entropy.

use std::fmt::Debug;
use std::iter::Sum;

use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive};

pub trait Scalar:
    Num + Signed + PartialOrd + Copy + FromPrimitive + Debug + Send + Sync + 'static
{
    /// `false` for NaN and infinities. Exact types are always finite.
    fn is_finite_value(self) -> bool {
        true
    }

    fn to_f64_lossy(self) -> f64;

    fn from_usize_exact(v: usize) -> Self {
        Self::from_usize(v).expect("integer not representable in scalar type")
    }
}

pub trait Real: Scalar + Float + Sum {
    fn cast_f64(v: f64) -> Self {
        <Self as num_traits::NumCast>::from(v).expect("f64 not representable")
    }
}

impl Scalar for f64 {
    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {}
impl Real for f32 {}

impl Scalar for Ratio<i64> {
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for Ratio<i128> {
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}
