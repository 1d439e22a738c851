//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real floating-point scalar usable by the model builder and the conic solver.
///
/// Implemented for `f32` and `f64`. Tolerance defaults live here because a
/// single-precision solve cannot reach the double-precision targets.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + LowerExp
    + Sum
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Default feasibility / gap tolerance for the interior-point solver.
    const DEFAULT_TOL: f64;
    /// Default static regularization added to the KKT diagonal.
    const DEFAULT_STATIC_REG: f64;

    /// Converts an `f64` literal. Every value used this way fits in `f32`.
    #[inline(always)]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline(always)]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    const DEFAULT_TOL: f64 = 1e-9;
    const DEFAULT_STATIC_REG: f64 = 1e-8;
}

impl Scalar for f32 {
    const DEFAULT_TOL: f64 = 1e-4;
    const DEFAULT_STATIC_REG: f64 = 1e-5;
}

/// Infinity norm of a slice; zero for an empty slice.
pub fn norm_inf<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm2<T: Scalar>(v: &[T]) -> T {
    dot(v, v).sqrt()
}

/// `y += alpha * x`
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}
