//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! Everything is written against [`Real`], which is satisfied by `f32` and
//! `f64`. The Monte-Carlo drivers and the CLI use the `f64` aliases exported
//! at the crate root.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar usable by the filters, the SDE engine and the PDE solver.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static {
    /// Converts an `f64` literal. Panics only if the target type cannot
    /// represent finite `f64` values at all, which never happens for floats.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal not representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::lit(n as f64)
    }

    #[inline]
    fn is_finite_value(self) -> bool {
        self.as_f64().is_finite()
    }

    /// Relative tolerance used by the scale-free definiteness test.
    fn definiteness_ratio() -> Self;
}

impl Real for f64 {
    fn definiteness_ratio() -> Self {
        1e-10
    }
}

impl Real for f32 {
    // 1e-10 is below f32 resolution; the closest meaningful ratio.
    fn definiteness_ratio() -> Self {
        1e-6
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_round_trip() {
        assert_eq!(f64::lit(0.25), 0.25);
        assert_eq!(f32::lit(0.5), 0.5f32);
        assert!(f64::lit(1.0).is_finite_value());
        assert!(!(f64::lit(1.0) / f64::lit(0.0)).is_finite_value());
    }
}
