//! Investment strategies. Feedback strategies see the filter parameters and
//! time only, never the hidden state.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub enum Strategy<T: Real> {
    Constant(DVector<T>),
    /// `h = offset + gain · summary`, where `summary` is the filter mean `m`
    /// for Gaussian filters and the probability vector `p` for Wonham.
    AffineFeedback { offset: DVector<T>, gain: DMatrix<T> },
}

impl<T: Real> Strategy<T> {
    pub fn constant(h: &[T]) -> Self {
        Strategy::Constant(DVector::from_column_slice(h))
    }

    pub fn dim(&self) -> usize {
        match self {
            Strategy::Constant(h) => h.len(),
            Strategy::AffineFeedback { offset, .. } => offset.len(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Strategy::Constant(_))
    }

    pub fn check(&self, m1: usize, summary_dim: usize) -> Result<()> {
        if self.dim() != m1 {
            return Err(Error::shape("strategy", m1, self.dim()));
        }
        if let Strategy::AffineFeedback { gain, .. } = self {
            if gain.shape() != (m1, summary_dim) {
                return Err(Error::shape(
                    "strategy gain",
                    format!("{m1}x{summary_dim}"),
                    format!("{:?}", gain.shape()),
                ));
            }
        }
        Ok(())
    }

    /// Writes `h(t, summary)` into `out`.
    #[inline]
    pub fn eval_into(&self, _t: T, summary: &DVector<T>, out: &mut DVector<T>) {
        match self {
            Strategy::Constant(h) => out.copy_from(h),
            Strategy::AffineFeedback { offset, gain } => {
                out.copy_from(offset);
                out.gemv(T::one(), gain, summary, T::one());
            }
        }
    }

    pub fn eval(&self, t: T, summary: &DVector<T>) -> DVector<T> {
        let mut out = DVector::zeros(self.dim());
        self.eval_into(t, summary, &mut out);
        out
    }

    /// The same strategy with every output multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        match self {
            Strategy::Constant(h) => Strategy::Constant(h * factor),
            Strategy::AffineFeedback { offset, gain } => Strategy::AffineFeedback {
                offset: offset * factor,
                gain: gain * factor,
            },
        }
    }
}
