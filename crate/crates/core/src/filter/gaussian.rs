//! Kalman–Bucy and extended Kalman filters.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{psd_floor, symmetrize, ObsGram};
use crate::model::{LinearGaussianModel, StateSpace};
use crate::scalar::Real;

/// Conditional mean and covariance of the hidden state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaussianFilterState<T: Real> {
    pub m: DVector<T>,
    pub pi: DMatrix<T>,
}

impl<T: Real> GaussianFilterState<T> {
    pub fn new(m: DVector<T>, pi: DMatrix<T>) -> Self {
        Self { m, pi }
    }

    /// Symmetric, and smallest eigenvalue at least `-1e-10 · trace`.
    pub fn is_valid(&self) -> bool {
        let n = self.m.len();
        if self.pi.shape() != (n, n) || self.pi != self.pi.transpose() {
            return false;
        }
        let tr = self.pi.trace().abs();
        crate::linalg::min_eigenvalue(&self.pi) >= -T::lit(1e-10) * tr
    }
}

/// Linearization of the drifts around the filter mean.
#[derive(Clone, Debug, PartialEq)]
pub struct Linearization<T: Real> {
    pub bbar: DVector<T>,
    pub b: DMatrix<T>,
    pub abar: DVector<T>,
    pub ay: DMatrix<T>,
}

pub fn ekf_linearize<T: Real, M: StateSpace<T> + ?Sized>(
    model: &M,
    t: T,
    state: &GaussianFilterState<T>,
    y: &DVector<T>,
) -> Linearization<T> {
    let (n, my) = (model.state_dim(), model.obs_dim());
    let mut b_at = DVector::zeros(n);
    let mut bmat = DMatrix::zeros(n, n);
    let mut a_at = DVector::zeros(my);
    let mut amat = DMatrix::zeros(my, n);
    model.state_drift(t, &state.m, y, &mut b_at);
    model.state_drift_jacobian(t, &state.m, y, &mut bmat);
    model.obs_drift(t, &state.m, y, &mut a_at);
    model.obs_drift_jacobian(t, &state.m, y, &mut amat);
    Linearization {
        bbar: b_at - &bmat * &state.m,
        b: bmat,
        abar: a_at - &amat * &state.m,
        ay: amat,
    }
}

/// Gain `(Π A' + Λ Σ^Y') (Σ^YΣ^Y')^{-1}`.
pub fn kalman_gain<T: Real>(
    pi: &DMatrix<T>,
    ay: &DMatrix<T>,
    lambda: &DMatrix<T>,
    sigma_y: &DMatrix<T>,
    gram: &ObsGram<T>,
) -> DMatrix<T> {
    (pi * ay.transpose() + lambda * sigma_y.transpose()) * &gram.inv
}

/// Right-hand side of the Riccati equation.
pub fn riccati_rhs<T: Real>(
    pi: &DMatrix<T>,
    b: &DMatrix<T>,
    ay: &DMatrix<T>,
    lambda: &DMatrix<T>,
    sigma_y: &DMatrix<T>,
    gram: &ObsGram<T>,
) -> DMatrix<T> {
    let cross = pi * ay.transpose() + lambda * sigma_y.transpose();
    lambda * lambda.transpose() + b * pi + pi * b.transpose() - &cross * &gram.inv * cross.transpose()
}

/// Euler step shared by the exact and the extended filter.
#[allow(clippy::too_many_arguments)]
fn gaussian_update<T: Real>(
    state: &GaussianFilterState<T>,
    lin: &Linearization<T>,
    lambda: &DMatrix<T>,
    sigma_y: &DMatrix<T>,
    gram: &ObsGram<T>,
    dy: &DVector<T>,
    dt: T,
    shift: Option<&DVector<T>>,
) -> Result<GaussianFilterState<T>> {
    let gain = kalman_gain(&state.pi, &lin.ay, lambda, sigma_y, gram);
    let mut drift_b = &lin.bbar + &lin.b * &state.m;
    let mut drift_a = &lin.abar + &lin.ay * &state.m;
    if let Some(s) = shift {
        drift_b -= lambda * s;
        drift_a -= sigma_y * s;
    }
    let innovation = dy - drift_a * dt;
    let m = &state.m + drift_b * dt + &gain * innovation;
    let rhs = riccati_rhs(&state.pi, &lin.b, &lin.ay, lambda, sigma_y, gram);
    let pi = stabilize(symmetrize(&(&state.pi + rhs * dt)));
    if m.iter().chain(pi.iter()).any(|v| !v.is_finite_value()) {
        return Err(Error::Numerical("non-finite Gaussian filter state".into()));
    }
    Ok(GaussianFilterState { m, pi })
}

/// Eigenvalue floor at zero, skipped when the matrix is already PSD.
fn stabilize<T: Real>(pi: DMatrix<T>) -> DMatrix<T> {
    if pi.nrows() == 1 {
        let v = pi[(0, 0)].max(T::zero());
        return DMatrix::from_element(1, 1, v);
    }
    if pi.clone().cholesky().is_some() {
        pi
    } else {
        psd_floor(&pi)
    }
}

/// One EKF step. With `shift = Some(s)` the drifts are replaced by the
/// shifted `b − Λs` and `a^Y − Σ^Y s`.
#[allow(clippy::too_many_arguments)]
pub fn ekf_step<T: Real, M: StateSpace<T> + ?Sized>(
    model: &M,
    t: T,
    state: &GaussianFilterState<T>,
    y: &DVector<T>,
    dy: &DVector<T>,
    dt: T,
    shift: Option<&DVector<T>>,
) -> Result<GaussianFilterState<T>> {
    let (n, my, d) = (model.state_dim(), model.obs_dim(), model.noise_dim());
    if state.m.len() != n || dy.len() != my {
        return Err(Error::shape("filter step", format!("n={n}, mY={my}"), format!("n={}, mY={}", state.m.len(), dy.len())));
    }
    let lin = ekf_linearize(model, t, state, y);
    let mut lambda = DMatrix::zeros(n, d);
    model.state_diffusion(t, &state.m, y, &mut lambda);
    let mut sigma_y = DMatrix::zeros(my, d);
    model.obs_diffusion(t, y, &mut sigma_y);
    let gram = model.obs_gram(t, y)?;
    gaussian_update(state, &lin, &lambda, &sigma_y, &gram, dy, dt, shift)
}

/// One Kalman–Bucy step: the same update with the model's own matrices.
pub fn kalman_bucy_step<T: Real>(
    model: &LinearGaussianModel<T>,
    gram: &ObsGram<T>,
    state: &GaussianFilterState<T>,
    dy: &DVector<T>,
    dt: T,
    shift: Option<&DVector<T>>,
) -> Result<GaussianFilterState<T>> {
    let lin = Linearization {
        bbar: model.b0.clone(),
        b: model.b.clone(),
        abar: model.a0.clone(),
        ay: model.a.clone(),
    };
    gaussian_update(state, &lin, &model.lambda, &model.sigma_y, gram, dy, dt, shift)
}

/// Covariance path and gains of a Kalman–Bucy filter. In the linear-Gaussian
/// model both are deterministic, so one schedule serves every path.
#[derive(Clone, Debug)]
pub struct KalmanSchedule<T: Real> {
    pub dt: T,
    /// `Π(t_k)`, `k = 0..=steps`.
    pub pi: Vec<DMatrix<T>>,
    /// Gain used on step `k`, `k = 0..steps`.
    pub gain: Vec<DMatrix<T>>,
    pub gram: ObsGram<T>,
}

impl<T: Real> KalmanSchedule<T> {
    pub fn new(model: &LinearGaussianModel<T>, dt: T, steps: usize) -> Result<Self> {
        model.check()?;
        let gram = ObsGram::new(&model.sigma_y)?;
        let mut pi = Vec::with_capacity(steps + 1);
        let mut gain = Vec::with_capacity(steps);
        let mut p = model.p0.clone();
        for _ in 0..steps {
            gain.push(kalman_gain(&p, &model.a, &model.lambda, &model.sigma_y, &gram));
            let rhs = riccati_rhs(&p, &model.b, &model.a, &model.lambda, &model.sigma_y, &gram);
            let next = stabilize(symmetrize(&(&p + rhs * dt)));
            pi.push(std::mem::replace(&mut p, next));
        }
        pi.push(p);
        Ok(Self { dt, pi, gain, gram })
    }

    pub fn steps(&self) -> usize {
        self.gain.len()
    }

    /// Mean update on step `k`, in place; `scratch` must have length mY.
    #[allow(clippy::too_many_arguments)]
    pub fn step_mean(
        &self,
        model: &LinearGaussianModel<T>,
        k: usize,
        m: &mut DVector<T>,
        dy: &DVector<T>,
        shift_b: Option<&DVector<T>>,
        shift_a: Option<&DVector<T>>,
        scratch: &mut DVector<T>,
    ) {
        let dt = self.dt;
        // innovation = dy − (a0 + A m − Σ^Y s) dt
        scratch.copy_from(&model.a0);
        scratch.gemv(T::one(), &model.a, m, T::one());
        if let Some(sa) = shift_a {
            *scratch -= sa;
        }
        scratch.scale_mut(-dt);
        *scratch += dy;
        let mut drift = model.b0.clone();
        drift.gemv(T::one(), &model.b, m, T::one());
        if let Some(sb) = shift_b {
            drift -= sb;
        }
        m.axpy(dt, &drift, T::one());
        m.gemv(T::one(), &self.gain[k], scratch, T::one());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// dX = 0, dY = X dt + dW.
    fn silent_state() -> LinearGaussianModel<f64> {
        LinearGaussianModel {
            b0: DVector::zeros(1),
            b: DMatrix::zeros(1, 1),
            lambda: DMatrix::zeros(1, 1),
            a0: DVector::zeros(1),
            a: DMatrix::identity(1, 1),
            sigma_y: DMatrix::identity(1, 1),
            m0: DVector::zeros(1),
            p0: DMatrix::identity(1, 1),
        }
    }

    #[test]
    fn riccati_matches_closed_form() {
        let model = silent_state();
        let dt = 1.0 / 512.0;
        let sched = KalmanSchedule::new(&model, dt, 512).unwrap();
        let p1 = sched.pi[512][(0, 0)];
        assert!((p1 - 0.5).abs() <= 2.0 * dt, "Π(1) = {p1}");
    }

    #[test]
    fn linearization_of_a_square() {
        use crate::model::{CoefficientMap, Coefficients, Dimensions, Family, HiddenLaw, ModelSpec};
        let dims = Dimensions::new(0, 1, 1, 1, 0).unwrap();
        let mut coef = Coefficients::zeros(&dims);
        coef.b = CoefficientMap::new(
            1,
            1,
            1,
            2,
            Family::Quadratic {
                offset: DVector::zeros(1),
                linear: DMatrix::zeros(1, 1),
                quad: vec![DMatrix::identity(1, 1)],
            },
        )
        .unwrap();
        let spec = ModelSpec::new(
            dims,
            coef,
            HiddenLaw::Gaussian {
                mean: DVector::zeros(1),
                cov: DMatrix::identity(1, 1),
            },
            DVector::zeros(2),
            1.0,
        )
        .unwrap();
        let st = GaussianFilterState::new(DVector::from_element(1, 3.0), DMatrix::identity(1, 1));
        let lin = ekf_linearize(&spec, 0.0, &st, spec.y0());
        assert_relative_eq!(lin.b[(0, 0)], 6.0);
        assert_relative_eq!(lin.bbar[0], -9.0);
    }

    #[test]
    fn steady_state_is_lambda() {
        let lam = 0.5;
        let mut model = silent_state();
        model.lambda = DMatrix::from_row_slice(1, 2, &[lam, 0.0]);
        model.sigma_y = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let dt = 1e-3;
        let steps = (10.0 / lam / dt) as usize;
        let sched = KalmanSchedule::new(&model, dt, steps).unwrap();
        let p = sched.pi[steps][(0, 0)];
        assert!((p - lam).abs() <= 0.01 * lam, "Π = {p}");
    }

    #[test]
    fn certainty_stays_certain() {
        let mut model = silent_state();
        model.p0 = DMatrix::zeros(1, 1);
        model.b0 = DVector::from_element(1, 0.3);
        model.b = DMatrix::from_element(1, 1, -1.0);
        model.m0 = DVector::from_element(1, 1.0);
        let gram = ObsGram::new(&model.sigma_y).unwrap();
        let dt = 0.01;
        let mut st = GaussianFilterState::new(model.m0.clone(), model.p0.clone());
        let mut m_ode = 1.0;
        for _ in 0..100 {
            st = kalman_bucy_step(&model, &gram, &st, &DVector::from_element(1, 0.123), dt, None).unwrap();
            m_ode += (0.3 - m_ode) * dt;
            assert_eq!(st.pi[(0, 0)], 0.0);
        }
        assert_relative_eq!(st.m[0], m_ode, epsilon = 1e-12);
    }

    #[test]
    fn ekf_equals_kalman_on_linear_model() {
        let model = silent_state();
        let gram = ObsGram::new(&model.sigma_y).unwrap();
        let mut a = GaussianFilterState::new(DVector::from_element(1, 0.2), DMatrix::identity(1, 1));
        let mut b = a.clone();
        let y = DVector::zeros(1);
        for k in 0..50 {
            let dy = DVector::from_element(1, 0.01 * (k as f64).sin());
            a = ekf_step(&model, 0.0, &a, &y, &dy, 0.01, None).unwrap();
            b = kalman_bucy_step(&model, &gram, &b, &dy, 0.01, None).unwrap();
            assert_relative_eq!(a.m, b.m, max_relative = 1e-12);
            assert_relative_eq!(a.pi, b.pi, max_relative = 1e-12);
        }
    }
}
