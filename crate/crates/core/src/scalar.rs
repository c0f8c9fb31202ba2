//! Scalar abstractions.
//!
//! Probability weights only need field arithmetic, so measures and convolution
//! powers work equally with floats and exact rationals. Matrix code needs
//! transcendental functions and is generic over [`Real`] instead.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// A probability weight: f32, f64 or an exact rational.
pub trait Weight:
    Clone + Debug + PartialOrd + Num + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Allowed deviation of the total mass from 1.
    const MASS_TOLERANCE: f64;

    /// Exact ratio `num / den` where the type allows it.
    fn ratio(num: u64, den: u64) -> Self;

    fn as_f64(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Weight for f64 {
    const MASS_TOLERANCE: f64 = 1e-12;

    fn ratio(num: u64, den: u64) -> Self {
        num as f64 / den as f64
    }
}

impl Weight for f32 {
    const MASS_TOLERANCE: f64 = 1e-5;

    fn ratio(num: u64, den: u64) -> Self {
        (num as f64 / den as f64) as f32
    }
}

impl Weight for BigRational {
    const MASS_TOLERANCE: f64 = 0.0;

    fn ratio(num: u64, den: u64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
}

/// Floating point scalar for the linear algebra in [`crate::matrix`].
pub trait Real: Float + FromPrimitive + Debug + Default + Send + Sync + 'static {
    /// Machine epsilon scaled to a usable convergence threshold.
    fn tolerance() -> Self {
        Self::epsilon() * Self::from_f64(8.0).unwrap()
    }

    fn of(x: f64) -> Self {
        Self::from_f64(x).unwrap()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Total of a weight sequence, exact for rationals.
pub fn total<'a, W: Weight>(weights: impl IntoIterator<Item = &'a W>) -> W {
    weights
        .into_iter()
        .fold(W::zero(), |acc, w| acc + w.clone())
}

pub(crate) fn is_one_within<W: Weight>(total: &W) -> bool {
    if W::MASS_TOLERANCE == 0.0 {
        total.is_one()
    } else {
        (total.as_f64() - 1.0).abs() <= W::MASS_TOLERANCE
    }
}
