//! Particle filter used as an oracle for the finite-dimensional filters.
//!
//! Signal and observation noise are correlated through the shared Wiener
//! process, so particles are propagated with the conditional law of
//! `Λ dW` given `Σ^Y dW = dy − a^Y dt`, and weighted by the Gaussian density
//! of the observation increment. Both are exact for the Euler discretization.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{psd_floor, sym_sqrt, ObsGram};
use crate::model::{HiddenLaw, StateSpace};
use crate::rng::{normal, uniform, PathRng};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParticleCloud<T: Real> {
    /// One particle per row.
    pub particles: DMatrix<T>,
    pub log_weights: Vec<T>,
    pub ess: T,
}

impl<T: Real> ParticleCloud<T> {
    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    /// Normalized weights (max-shifted before exponentiation).
    pub fn weights(&self) -> Result<Vec<T>> {
        normalized(&self.log_weights)
    }

    pub fn mean(&self) -> Result<DVector<T>> {
        let w = self.weights()?;
        let mut m = DVector::zeros(self.particles.ncols());
        for (i, wi) in w.iter().enumerate() {
            for j in 0..m.len() {
                m[j] += *wi * self.particles[(i, j)];
            }
        }
        Ok(m)
    }
}

fn normalized<T: Real>(logw: &[T]) -> Result<Vec<T>> {
    let max = logw.iter().copied().fold(T::lit(f64::NEG_INFINITY), |a, b| a.max(b));
    if !max.is_finite_value() {
        return Err(Error::DegenerateLikelihood);
    }
    let mut w: Vec<T> = logw.iter().map(|l| (*l - max).exp()).collect();
    let total = w.iter().fold(T::zero(), |a, b| a + *b);
    if !(total > T::zero()) || !total.is_finite_value() {
        return Err(Error::DegenerateLikelihood);
    }
    for v in w.iter_mut() {
        *v /= total;
    }
    Ok(w)
}

fn ess<T: Real>(w: &[T]) -> T {
    T::one() / w.iter().fold(T::zero(), |a, b| a + *b * *b)
}

/// Systematic resampling; returns the selected ancestor indices.
pub fn systematic_resample<T: Real>(w: &[T], rng: &mut PathRng) -> Vec<usize> {
    let n = w.len();
    let step = T::one() / T::from_usize_lossy(n);
    let mut u = uniform::<T>(rng) * step;
    let mut out = Vec::with_capacity(n);
    let mut cum = w[0];
    let mut j = 0;
    for _ in 0..n {
        while u > cum && j + 1 < n {
            j += 1;
            cum += w[j];
        }
        out.push(j);
        u += step;
    }
    out
}

/// Per-step summary of a particle run.
#[derive(Clone, Debug, Serialize)]
pub struct ParticleTrace<T: Real> {
    /// Weighted mean at `t_k`, `k = 0..=steps`.
    pub mean: Vec<DVector<T>>,
    pub ess: Vec<T>,
    pub resample_count: usize,
}

/// Conditional propagation matrices `M = ΛΣ^Y'S⁻¹` and a square root of
/// `ΛΛ' − M Σ^Y Λ'`.
fn kernel<T: Real>(lambda: &DMatrix<T>, sigma_y: &DMatrix<T>, gram: &ObsGram<T>) -> (DMatrix<T>, DMatrix<T>) {
    let m = lambda * sigma_y.transpose() * &gram.inv;
    let cov = lambda * lambda.transpose() - &m * sigma_y * lambda.transpose();
    (m, sym_sqrt(&psd_floor(&cov)))
}

/// Runs the filter along an observed path `ys` (`steps + 1` samples on a
/// uniform grid starting at `t0`).
pub fn run_particle_filter<T: Real, M: StateSpace<T> + ?Sized>(
    model: &M,
    x0: &HiddenLaw<T>,
    t0: T,
    dt: T,
    ys: &[DVector<T>],
    n_particles: usize,
    rng: &mut PathRng,
) -> Result<(ParticleTrace<T>, ParticleCloud<T>)> {
    let HiddenLaw::Gaussian { mean, cov } = x0 else {
        return Err(Error::Unsupported("particle filter needs a Gaussian initial law".into()));
    };
    if n_particles == 0 || ys.is_empty() {
        return Err(Error::Validation("particle filter needs particles and observations".into()));
    }
    let (n, my, d) = (model.state_dim(), model.obs_dim(), model.noise_dim());
    let root = sym_sqrt(&psd_floor(cov));
    let mut xs = DMatrix::zeros(n_particles, n);
    let mut z = DVector::zeros(n);
    for i in 0..n_particles {
        for v in z.iter_mut() {
            *v = normal(rng);
        }
        let x = mean + &root * &z;
        xs.row_mut(i).copy_from(&x.transpose());
    }
    let mut logw = vec![T::zero(); n_particles];
    let mut trace = ParticleTrace {
        mean: Vec::with_capacity(ys.len()),
        ess: Vec::with_capacity(ys.len()),
        resample_count: 0,
    };
    let cloud_mean = |xs: &DMatrix<T>, w: &[T]| {
        let mut m = DVector::zeros(n);
        for (i, wi) in w.iter().enumerate() {
            for j in 0..n {
                m[j] += *wi * xs[(i, j)];
            }
        }
        m
    };
    let uniform_w = vec![T::one() / T::from_usize_lossy(n_particles); n_particles];
    trace.mean.push(cloud_mean(&xs, &uniform_w));
    trace.ess.push(T::from_usize_lossy(n_particles));

    let sqrt_dt = dt.sqrt();
    let mut sigma_y = DMatrix::zeros(my, d);
    let mut lambda = DMatrix::zeros(n, d);
    let mut x = DVector::zeros(n);
    let mut b = DVector::zeros(n);
    let mut a = DVector::zeros(my);
    let mut resid = DVector::zeros(my);
    let mut noise = DVector::zeros(n);
    let mut w = uniform_w.clone();

    for k in 0..ys.len() - 1 {
        let t = t0 + T::from_usize_lossy(k) * dt;
        let y = &ys[k];
        let dy = &ys[k + 1] - y;
        model.obs_diffusion(t, y, &mut sigma_y);
        let gram = model.obs_gram(t, y)?;
        let sinv_dy = &gram.inv * &dy;
        let fixed = if model.state_diffusion_is_constant() {
            model.state_diffusion(t, &x, y, &mut lambda);
            Some(kernel(&lambda, &sigma_y, &gram))
        } else {
            None
        };
        for i in 0..n_particles {
            for j in 0..n {
                x[j] = xs[(i, j)];
            }
            model.obs_drift(t, &x, y, &mut a);
            let sinv_a = &gram.inv * &a;
            logw[i] += a.dot(&sinv_dy) - T::lit(0.5) * a.dot(&sinv_a) * dt;
            model.state_drift(t, &x, y, &mut b);
            resid.copy_from(&dy);
            resid.axpy(-dt, &a, T::one());
            for v in noise.iter_mut() {
                *v = normal::<T>(rng) * sqrt_dt;
            }
            let owned;
            let (gain, root) = match &fixed {
                Some(k) => (&k.0, &k.1),
                None => {
                    model.state_diffusion(t, &x, y, &mut lambda);
                    owned = kernel(&lambda, &sigma_y, &gram);
                    (&owned.0, &owned.1)
                }
            };
            let step = &b * dt + gain * &resid + root * &noise;
            for j in 0..n {
                xs[(i, j)] += step[j];
            }
        }
        w = normalized(&logw)?;
        let e = ess(&w);
        trace.mean.push(cloud_mean(&xs, &w));
        trace.ess.push(e);
        if e < T::from_usize_lossy(n_particles) * T::lit(0.5) {
            let idx = systematic_resample(&w, rng);
            xs = xs.select_rows(idx.iter());
            logw.iter_mut().for_each(|l| *l = T::zero());
            w.iter_mut().for_each(|v| *v = T::one() / T::from_usize_lossy(n_particles));
            trace.resample_count += 1;
        }
    }
    let cloud = ParticleCloud {
        particles: xs,
        log_weights: logw,
        ess: ess(&w),
    };
    Ok((trace, cloud))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn systematic_resampling_follows_weights() {
        let mut rng = stream_rng(1, 0);
        let idx = systematic_resample(&[0.0, 1.0, 0.0], &mut rng);
        assert_eq!(idx, vec![1, 1, 1]);
        let idx = systematic_resample(&[0.5, 0.5], &mut rng);
        assert_eq!(idx, vec![0, 1]);
    }

    #[test]
    fn degenerate_weights_error() {
        assert!(matches!(
            normalized(&[f64::NEG_INFINITY, f64::NEG_INFINITY]),
            Err(Error::DegenerateLikelihood)
        ));
        let w = normalized(&[0.0, 0.0]).unwrap();
        assert_eq!(ess(&w), 2.0);
    }
}
