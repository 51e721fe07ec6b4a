use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Uniform time grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TimeGrid<T: Real> {
    pub t0: T,
    pub horizon: T,
    pub dt: T,
    pub steps: usize,
}

impl<T: Real> TimeGrid<T> {
    /// `dt` must divide `horizon − t0` up to round-off.
    pub fn new(t0: T, horizon: T, dt: T) -> Result<Self> {
        if !(dt > T::zero()) || !dt.is_finite_value() {
            return Err(Error::Validation(format!("time step must be positive, got {}", dt.as_f64())));
        }
        let span = horizon - t0;
        if !(span > T::zero()) {
            return Err(Error::Validation("horizon must exceed the start time".into()));
        }
        let ratio = (span / dt).as_f64();
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-6 * ratio.max(1.0) || steps < 1.0 {
            return Err(Error::Validation(format!(
                "time step {} does not divide the horizon {}",
                dt.as_f64(),
                span.as_f64()
            )));
        }
        Ok(Self {
            t0,
            horizon,
            dt,
            steps: steps as usize,
        })
    }

    pub fn with_steps(t0: T, horizon: T, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Validation("a grid needs at least one step".into()));
        }
        Ok(Self {
            t0,
            horizon,
            dt: (horizon - t0) / T::from_usize_lossy(steps),
            steps,
        })
    }

    #[inline]
    pub fn time(&self, k: usize) -> T {
        self.t0 + T::from_usize_lossy(k) * self.dt
    }

    pub fn same_as(&self, other: &Self) -> bool {
        self.steps == other.steps
            && (self.dt - other.dt).abs() <= T::lit(1e-12) * self.dt
            && (self.t0 - other.t0).abs() <= T::lit(1e-12) * (T::one() + self.t0.abs())
    }
}
