//! Scalar abstraction: the numeric core is generic over the floating-point
//! type, with `f64` as the default used by the CLI.

use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar usable throughout the estimation stack.
///
/// `f32` and `f64` both qualify; all linear algebra, test statistics, and
/// the synthetic data generator are written against this trait.
pub trait Scalar: nalgebra::RealField + Copy + FromPrimitive + ToPrimitive {}

impl<T> Scalar for T where T: nalgebra::RealField + Copy + FromPrimitive + ToPrimitive {}

/// Converts an `f64` constant into the working scalar type.
#[inline]
pub(crate) fn conv<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 constant must be representable in the scalar type")
}

/// Converts a `usize` count into the working scalar type.
#[inline]
pub(crate) fn conv_usize<T: Scalar>(n: usize) -> T {
    T::from_usize(n).expect("count must be representable in the scalar type")
}
