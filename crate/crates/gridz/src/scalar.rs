//! Scalar abstraction for the numeric core.
//!
//! Every algorithm in this crate is written against [`Scalar`], which both
//! `f32` and `f64` satisfy. The trait bundles nalgebra's `RealField` (field
//! operations, trigonometry, decompositions) with `num_traits` conversions so
//! constants can be injected from `f64` literals regardless of the working
//! precision. The public domain types default their scalar parameter to
//! `f64`, which is what the reference pipelines use.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar usable by the toolkit (`f32`, `f64`).
pub trait Scalar: RealField + FromPrimitive + ToPrimitive + Copy + Default {}

impl<T> Scalar for T where T: RealField + FromPrimitive + ToPrimitive + Copy + Default {}

/// Lift an `f64` constant into the working scalar type.
///
/// Panics only if the scalar type cannot represent ordinary finite `f64`
/// values, which cannot happen for the supported IEEE types.
#[inline]
pub fn fl<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 constant must be representable in the scalar type")
}

/// Lower a scalar to `f64` for reporting and serialization.
#[inline]
pub fn lower<T: Scalar>(x: T) -> f64 {
    x.to_f64().expect("scalar must be convertible to f64")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrips_constants() {
        let x: f64 = fl(0.25);
        assert_eq!(x, 0.25);
        let y: f32 = fl(0.25);
        assert_eq!(y, 0.25f32);
        assert_eq!(lower(y), 0.25);
    }
}
