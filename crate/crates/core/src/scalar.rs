//! Scalar abstraction for the numerical kernels.
//!
//! Everything downstream is written against [`Real`] so the same code runs in
//! `f32` and `f64`. The trait deliberately builds on `nalgebra::RealField`
//! rather than `num_traits::Float`: mixing the two in one bound makes common
//! method calls (`sqrt`, `abs`, ...) ambiguous at every call site.

use num_traits::{FromPrimitive, ToPrimitive};

pub trait Real:
    nalgebra::RealField
    + FromPrimitive
    + ToPrimitive
    + Copy
    + Default
    + std::fmt::Display
    + std::fmt::LowerExp
{
    fn finite(self) -> bool;

    /// Machine epsilon of the concrete type.
    fn eps() -> Self;
}

macro_rules! impl_real {
    ($($t:ty),*) => {$(
        impl Real for $t {
            #[inline]
            fn finite(self) -> bool {
                self.is_finite()
            }

            #[inline]
            fn eps() -> Self {
                <$t>::EPSILON
            }
        }
    )*};
}

impl_real!(f32, f64);

/// Converts an `f64` literal into the working scalar type.
///
/// Panics only for non-finite input, which never occurs for the fixed
/// constants this is used on.
#[inline]
pub fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("finite literal converts to any Real type")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_conversion_roundtrips() {
        assert_eq!(real::<f64>(1.5), 1.5);
        assert_eq!(real::<f32>(1.5), 1.5f32);
        assert_eq!(real::<f64>(1e-300), 1e-300);
    }

    #[test]
    fn finiteness_check() {
        assert!(1.0f64.finite());
        assert!(!f64::INFINITY.finite());
        assert!(!f32::NAN.finite());
    }
}
