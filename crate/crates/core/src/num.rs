//! Scalar abstraction shared by the analytic models.

use std::fmt::{Debug, Display, LowerExp};
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point scalar the analytic models are generic over.
///
/// `f64` is the working precision. `f32` is adequate for the source and
/// synchronization models but not for the decoy inclusion-exclusion sums,
/// which cancel terms of nearly equal magnitude.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + FromStr
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal; exact for `f64`, rounded for `f32`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count fits in scalar")
    }

    /// Relative tolerance the quadrature driver can certify at this precision.
    fn quadrature_rel_tol() -> Self;
}

impl Real for f64 {
    fn quadrature_rel_tol() -> Self {
        1e-9
    }
}

impl Real for f32 {
    fn quadrature_rel_tol() -> Self {
        1e-4
    }
}

/// Binomial coefficient C(n, k) evaluated in `T` by the multiplicative formula.
pub fn binomial<T: Real>(n: usize, k: usize) -> T {
    if k > n {
        return T::zero();
    }
    let k = k.min(n - k);
    let mut acc = T::one();
    for i in 0..k {
        acc = acc * T::from_count(n - i) / T::from_count(i + 1);
    }
    acc
}

/// `1 - (1 - p)^k` without cancellation for small `p`.
pub fn one_minus_pow_complement<T: Real>(p: T, k: usize) -> T {
    if k == 0 {
        return T::zero();
    }
    if p >= T::one() {
        return T::one();
    }
    -(T::from_count(k) * (-p).ln_1p()).exp_m1()
}
