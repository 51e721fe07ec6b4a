//! Wonham filter for a hidden finite-state Markov chain.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::ObsGram;
use crate::model::{HiddenLaw, ModelSpec, StateSpace};
use crate::scalar::Real;

/// Conditional state probabilities.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimplexFilterState<T: Real> {
    pub p: DVector<T>,
}

impl<T: Real> SimplexFilterState<T> {
    pub fn is_valid(&self) -> bool {
        let total = self.p.iter().fold(T::zero(), |a, b| a + *b);
        self.p.iter().all(|v| *v >= T::zero()) && (total - T::one()).abs() <= T::lit(1e-12)
    }
}

/// Rows sum to zero, off-diagonal entries non-negative.
pub fn check_generator<T: Real>(q: &DMatrix<T>) -> Result<()> {
    if !q.is_square() {
        return Err(Error::InvalidGenerator(format!("generator must be square, got {:?}", q.shape())));
    }
    let scale = T::one() + q.abs().max();
    for i in 0..q.nrows() {
        let mut sum = T::zero();
        for j in 0..q.ncols() {
            if i != j && q[(i, j)] < T::zero() {
                return Err(Error::InvalidGenerator(format!("negative off-diagonal entry at ({i}, {j})")));
            }
            sum += q[(i, j)];
        }
        if sum.abs() > T::lit(1e-10) * scale {
            return Err(Error::InvalidGenerator(format!("row {i} sums to {:.3e}", sum.as_f64())));
        }
    }
    Ok(())
}

/// Clip negatives to zero and renormalize.
fn project<T: Real>(p: &mut DVector<T>) -> Result<()> {
    for v in p.iter_mut() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
    let total = p.iter().fold(T::zero(), |a, b| a + *b);
    if !(total > T::zero()) || !total.is_finite_value() {
        return Err(Error::Numerical("Wonham probabilities collapsed".into()));
    }
    *p /= total;
    Ok(())
}

/// Scalar-observation Wonham step, `dy = f(X) dt + σ dB`.
pub fn wonham_step<T: Real>(
    q: &DMatrix<T>,
    f: &DVector<T>,
    sigma: T,
    state: &SimplexFilterState<T>,
    dy: T,
    dt: T,
) -> Result<SimplexFilterState<T>> {
    check_generator(q)?;
    if !(sigma > T::zero()) {
        return Err(Error::Validation("observation noise σ must be positive".into()));
    }
    let p = &state.p;
    let fhat = f.dot(p);
    let inv = T::one() / (sigma * sigma);
    let drift = (p.transpose() * q).transpose();
    let mut next = p.clone();
    for i in 0..p.len() {
        let pf = p[i] * (f[i] - fhat);
        next[i] += drift[i] * dt - inv * fhat * pf * dt + inv * pf * dy;
    }
    project(&mut next)?;
    Ok(SimplexFilterState { p: next })
}

/// Wonham filter for a model whose hidden law is a Markov chain. Observation
/// drifts at each chain state are cached when they do not depend on `y`.
#[derive(Clone, Debug)]
pub struct WonhamFilter<'a, T: Real> {
    spec: &'a ModelSpec<T>,
    pub states: Vec<DVector<T>>,
    pub generator: DMatrix<T>,
    pub p0: DVector<T>,
    cached: Option<Vec<DVector<T>>>,
    sigma_y: DMatrix<T>,
}

impl<'a, T: Real> WonhamFilter<'a, T> {
    pub fn new(spec: &'a ModelSpec<T>) -> Result<Self> {
        let HiddenLaw::Categorical {
            states,
            probs,
            generator,
        } = spec.x0()
        else {
            return Err(Error::Unsupported("the Wonham filter needs a categorical hidden law".into()));
        };
        check_generator(generator)?;
        if !spec.obs_diffusion_is_constant() {
            return Err(Error::Unsupported("the Wonham filter needs a constant observation diffusion".into()));
        }
        let mut sigma_y = DMatrix::zeros(spec.dims().my(), spec.dims().d());
        spec.obs_diffusion(T::zero(), spec.y0(), &mut sigma_y);
        let coef = spec.coefficients();
        let y_free = [&coef.bf, &coef.a, &coef.c, &coef.ae].iter().all(|m| !m.depends_on_y());
        let mut filter = Self {
            spec,
            states: states.clone(),
            generator: generator.clone(),
            p0: probs.clone(),
            cached: None,
            sigma_y,
        };
        if y_free {
            filter.cached = Some(filter.compute_drifts(T::zero(), spec.y0()));
        }
        Ok(filter)
    }

    fn compute_drifts(&self, t: T, y: &DVector<T>) -> Vec<DVector<T>> {
        self.states
            .iter()
            .map(|x| {
                let mut out = DVector::zeros(self.spec.dims().my());
                self.spec.obs_drift(t, x, y, &mut out);
                out
            })
            .collect()
    }

    /// `a^Y` at every chain state.
    pub fn drifts(&self, t: T, y: &DVector<T>) -> std::borrow::Cow<'_, [DVector<T>]> {
        match &self.cached {
            Some(v) => std::borrow::Cow::Borrowed(v.as_slice()),
            None => std::borrow::Cow::Owned(self.compute_drifts(t, y)),
        }
    }

    pub fn sigma_y(&self) -> &DMatrix<T> {
        &self.sigma_y
    }

    pub fn gram(&self) -> Result<std::borrow::Cow<'_, ObsGram<T>>> {
        self.spec.obs_gram(T::zero(), self.spec.y0())
    }

    pub fn initial(&self) -> SimplexFilterState<T> {
        SimplexFilterState { p: self.p0.clone() }
    }

    /// Filtered observation drift `Σ p_i a^Y(x^i)`.
    pub fn hat_drift(&self, drifts: &[DVector<T>], p: &DVector<T>) -> DVector<T> {
        let mut out = DVector::zeros(drifts[0].len());
        for (f, w) in drifts.iter().zip(p.iter()) {
            out.axpy(*w, f, T::one());
        }
        out
    }

    /// `dp_i = (pQ)_i dt + p_i (f_i − â)' S⁻¹ (dy − (â − Σ^Y s) dt)`.
    #[allow(clippy::too_many_arguments)]
    pub fn step(
        &self,
        t: T,
        state: &SimplexFilterState<T>,
        y: &DVector<T>,
        dy: &DVector<T>,
        dt: T,
        shift: Option<&DVector<T>>,
        gram: &ObsGram<T>,
    ) -> Result<SimplexFilterState<T>> {
        let drifts = self.drifts(t, y);
        let p = &state.p;
        let ahat = self.hat_drift(&drifts, p);
        let mut innov = dy - &ahat * dt;
        if let Some(s) = shift {
            innov += &self.sigma_y * s * dt;
        }
        let weighted = &gram.inv * innov;
        let flow = (p.transpose() * &self.generator).transpose();
        let mut next = p.clone();
        for i in 0..p.len() {
            let gain = (&drifts[i] - &ahat).dot(&weighted);
            next[i] += flow[i] * dt + p[i] * gain;
        }
        project(&mut next)?;
        Ok(SimplexFilterState { p: next })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn generator_checks() {
        assert!(check_generator(&DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 2.0, -2.0])).is_ok());
        assert!(check_generator(&DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 2.0, -2.0])).is_err());
        assert!(check_generator(&DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 2.0, -2.0])).is_err());
    }

    #[test]
    fn uninformative_step_is_forward_equation() {
        let q = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 2.0, -2.0]);
        let f = DVector::from_element(2, 0.3);
        let st = SimplexFilterState {
            p: DVector::from_column_slice(&[0.5, 0.5]),
        };
        let next = wonham_step(&q, &f, 1.0, &st, 0.7, 0.01).unwrap();
        assert_relative_eq!(next.p[0], 0.5 + 0.01 * (-0.5 + 1.0), epsilon = 1e-15);
        assert!(next.is_valid());
    }

    #[test]
    fn clipping_keeps_simplex() {
        let q = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
        let f = DVector::from_column_slice(&[-5.0, 5.0]);
        let st = SimplexFilterState {
            p: DVector::from_column_slice(&[0.01, 0.99]),
        };
        let next = wonham_step(&q, &f, 0.1, &st, 3.0, 0.1).unwrap();
        assert!(next.is_valid());
        assert_eq!(next.p[0], 0.0);
    }
}
