//! The filter written as a diffusion `dζ = G dt + H dY` in its own
//! parameters.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::gaussian::{ekf_linearize, kalman_gain, riccati_rhs, GaussianFilterState};
use super::wonham::{SimplexFilterState, WonhamFilter};
use super::FilterKind;
use crate::error::{Error, Result};
use crate::linalg::{unvech, vech};
use crate::model::StateSpace;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FilterDriftDiffusion<T: Real> {
    pub g: DVector<T>,
    pub h: DMatrix<T>,
}

impl<T: Real> FilterDriftDiffusion<T> {
    /// `Ĝ = G + H â^Y`.
    pub fn g_hat(&self, hat_ay: &DVector<T>) -> DVector<T> {
        &self.g + &self.h * hat_ay
    }

    pub fn apply(&self, zeta: &DVector<T>, dy: &DVector<T>, dt: T) -> DVector<T> {
        zeta + &self.g * dt + &self.h * dy
    }
}

/// `ζ = (m, vech Π)`.
pub fn gaussian_zeta<T: Real>(state: &GaussianFilterState<T>) -> DVector<T> {
    let mut v: Vec<T> = state.m.iter().copied().collect();
    v.extend(vech(&state.pi));
    DVector::from_vec(v)
}

pub fn gaussian_from_zeta<T: Real>(zeta: &DVector<T>, n: usize) -> GaussianFilterState<T> {
    GaussianFilterState {
        m: zeta.rows(0, n).into_owned(),
        pi: unvech(&zeta.as_slice()[n..], n),
    }
}

/// Canonical coefficients of a Kalman-type filter on `model`.
pub fn gaussian_filter_as_zeta<T: Real, M: StateSpace<T> + ?Sized>(
    model: &M,
    kind: FilterKind,
    t: T,
    state: &GaussianFilterState<T>,
    y: &DVector<T>,
) -> Result<FilterDriftDiffusion<T>> {
    if !matches!(kind, FilterKind::Kf | FilterKind::Ekf) {
        return Err(Error::Unsupported(format!("{kind:?} is not a Gaussian filter")));
    }
    let (n, my, d) = (model.state_dim(), model.obs_dim(), model.noise_dim());
    let lin = ekf_linearize(model, t, state, y);
    let mut lambda = DMatrix::zeros(n, d);
    model.state_diffusion(t, &state.m, y, &mut lambda);
    let mut sigma_y = DMatrix::zeros(my, d);
    model.obs_diffusion(t, y, &mut sigma_y);
    let gram = model.obs_gram(t, y)?;
    let gain = kalman_gain(&state.pi, &lin.ay, &lambda, &sigma_y, &gram);
    let drift_b = &lin.bbar + &lin.b * &state.m;
    let drift_a = &lin.abar + &lin.ay * &state.m;
    let rhs = riccati_rhs(&state.pi, &lin.b, &lin.ay, &lambda, &sigma_y, &gram);
    let q = n + n * (n + 1) / 2;
    let mut g = DVector::zeros(q);
    g.rows_mut(0, n).copy_from(&(drift_b - &gain * drift_a));
    for (i, v) in vech(&rhs).into_iter().enumerate() {
        g[n + i] = v;
    }
    let mut h = DMatrix::zeros(q, my);
    h.view_mut((0, 0), (n, my)).copy_from(&gain);
    Ok(FilterDriftDiffusion { g, h })
}

/// Canonical coefficients of the Wonham filter: `H_i = p_i (f_i − â)' S⁻¹`,
/// `G = pQ − H â`.
pub fn wonham_as_zeta<T: Real>(
    filter: &WonhamFilter<'_, T>,
    t: T,
    state: &SimplexFilterState<T>,
    y: &DVector<T>,
) -> Result<FilterDriftDiffusion<T>> {
    let drifts = filter.drifts(t, y);
    let gram = filter.gram()?;
    let p = &state.p;
    let ahat = filter.hat_drift(&drifts, p);
    let s = p.len();
    let my = ahat.len();
    let mut h = DMatrix::zeros(s, my);
    for i in 0..s {
        let row = (&drifts[i] - &ahat).transpose() * &gram.inv * p[i];
        h.row_mut(i).copy_from(&row);
    }
    let flow = (p.transpose() * &filter.generator).transpose();
    let g = flow - &h * &ahat;
    Ok(FilterDriftDiffusion { g, h })
}
