//! Scalar abstraction for the linear algebra used by variable classification.
//!
//! Classification needs exact arithmetic, so the canonical instantiation is
//! [`Rational`](crate::Rational). The elimination routines are written against
//! [`Field`] so they also run over `f64` (with a pivot tolerance) or a
//! fixed-width `Ratio<i64>` when that is enough.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{Num, One, Signed, Zero};

/// A field element usable by [`crate::linalg`].
pub trait Field: Num + Signed + Clone + PartialOrd + Debug {
    /// Whether the value should be treated as zero when choosing pivots.
    fn is_negligible(&self) -> bool;

    fn from_i64(v: i64) -> Self;
}

impl Field for BigRational {
    fn is_negligible(&self) -> bool {
        self.is_zero()
    }

    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
}

impl Field for Ratio<i64> {
    fn is_negligible(&self) -> bool {
        self.is_zero()
    }

    fn from_i64(v: i64) -> Self {
        Ratio::from_integer(v)
    }
}

impl Field for f64 {
    fn is_negligible(&self) -> bool {
        self.abs() < 1e-9
    }

    fn from_i64(v: i64) -> Self {
        v as f64
    }
}

/// Scales a rational vector to the unique primitive integer vector on the
/// same ray: coprime entries, same direction.
pub fn primitive_integer_vector(v: &[BigRational]) -> Vec<i64> {
    use num_integer::Integer;

    let mut lcm = BigInt::one();
    for x in v {
        lcm = lcm.lcm(x.denom());
    }
    let scaled: Vec<BigInt> = v.iter().map(|x| (x * &lcm).to_integer()).collect();
    let mut gcd = BigInt::zero();
    for x in &scaled {
        gcd = gcd.gcd(x);
    }
    if gcd.is_zero() {
        return vec![0; v.len()];
    }
    scaled
        .into_iter()
        .map(|x| {
            let q = x / &gcd;
            i64::try_from(q).expect("integer invariant exceeds i64")
        })
        .collect()
}
