//! Uniform driver over the finite-dimensional filters, used by the path
//! engine.

use std::borrow::Cow;

use nalgebra::{DMatrix, DVector};

use super::gaussian::{ekf_step, GaussianFilterState, KalmanSchedule};
use super::wonham::{SimplexFilterState, WonhamFilter};
use super::{FilterKind, FilterState};
use crate::error::{Error, Result};
use crate::linalg::ObsGram;
use crate::model::{HiddenLaw, LinearGaussianModel, ModelSpec, StateSpace};
use crate::moments::hat_gaussian;
use crate::scalar::Real;

pub enum FilterRunner<'a, T: Real> {
    /// Exact filter on a linear-Gaussian model with a precomputed covariance
    /// schedule.
    Kalman {
        model: LinearGaussianModel<T>,
        schedule: KalmanSchedule<T>,
    },
    Ekf {
        spec: &'a ModelSpec<T>,
    },
    Wonham {
        filter: WonhamFilter<'a, T>,
    },
}

/// Per-path filter state.
#[derive(Clone, Debug, PartialEq)]
pub enum RunnerState<T: Real> {
    Gaussian(GaussianFilterState<T>),
    Simplex(SimplexFilterState<T>),
}

impl<T: Real> RunnerState<T> {
    /// `m` or `p`; what feedback strategies act on.
    pub fn summary(&self) -> &DVector<T> {
        match self {
            RunnerState::Gaussian(g) => &g.m,
            RunnerState::Simplex(s) => &s.p,
        }
    }

    pub fn to_filter_state(&self) -> FilterState<T> {
        match self {
            RunnerState::Gaussian(g) => FilterState::Gaussian(g.clone()),
            RunnerState::Simplex(s) => FilterState::Simplex(s.clone()),
        }
    }
}

impl<'a, T: Real> FilterRunner<'a, T> {
    /// `dt`/`steps` are only used to precompute the Kalman schedule.
    pub fn new(spec: &'a ModelSpec<T>, kind: FilterKind, dt: T, steps: usize) -> Result<Self> {
        match kind {
            FilterKind::Kf => {
                let model = spec.to_linear_gaussian().ok_or_else(|| {
                    Error::Unsupported("the Kalman-Bucy filter needs a linear-Gaussian model; use `ekf`".into())
                })?;
                let schedule = KalmanSchedule::new(&model, dt, steps)?;
                Ok(FilterRunner::Kalman { model, schedule })
            }
            FilterKind::Ekf => {
                if spec.x0().is_categorical() {
                    return Err(Error::Unsupported("Gaussian filters need a Gaussian initial law".into()));
                }
                Ok(FilterRunner::Ekf { spec })
            }
            FilterKind::Wonham => Ok(FilterRunner::Wonham {
                filter: WonhamFilter::new(spec)?,
            }),
            FilterKind::Particle => Err(Error::Unsupported(
                "the particle filter is an oracle and cannot drive the criterion engine".into(),
            )),
        }
    }

    /// Default filter for a model: exact when available.
    pub fn auto(spec: &'a ModelSpec<T>, dt: T, steps: usize) -> Result<Self> {
        Self::new(spec, Self::default_kind(spec), dt, steps)
    }

    pub fn default_kind(spec: &ModelSpec<T>) -> FilterKind {
        if spec.x0().is_categorical() {
            FilterKind::Wonham
        } else if spec.to_linear_gaussian().is_some() {
            FilterKind::Kf
        } else {
            FilterKind::Ekf
        }
    }

    pub fn kind(&self) -> FilterKind {
        match self {
            FilterRunner::Kalman { .. } => FilterKind::Kf,
            FilterRunner::Ekf { .. } => FilterKind::Ekf,
            FilterRunner::Wonham { .. } => FilterKind::Wonham,
        }
    }

    pub fn summary_dim(&self) -> usize {
        match self {
            FilterRunner::Kalman { model, .. } => model.m0.len(),
            FilterRunner::Ekf { spec } => spec.dims().n,
            FilterRunner::Wonham { filter } => filter.p0.len(),
        }
    }

    pub fn initial(&self) -> RunnerState<T> {
        match self {
            FilterRunner::Kalman { model, .. } => {
                RunnerState::Gaussian(GaussianFilterState::new(model.m0.clone(), model.p0.clone()))
            }
            FilterRunner::Ekf { spec } => match spec.x0() {
                HiddenLaw::Gaussian { mean, cov } => RunnerState::Gaussian(GaussianFilterState::new(mean.clone(), cov.clone())),
                HiddenLaw::Categorical { .. } => unreachable!("checked at construction"),
            },
            FilterRunner::Wonham { filter } => RunnerState::Simplex(filter.initial()),
        }
    }

    /// Conditional expectation of the observation drift, `â^Y`.
    pub fn hat_ay(&self, t: T, state: &RunnerState<T>, y: &DVector<T>, out: &mut DVector<T>) -> Result<()> {
        match (self, state) {
            (FilterRunner::Kalman { model, .. }, RunnerState::Gaussian(g)) => {
                out.copy_from(&model.a0);
                out.gemv(T::one(), &model.a, &g.m, T::one());
                Ok(())
            }
            (FilterRunner::Ekf { spec }, RunnerState::Gaussian(g)) => {
                out.copy_from(&hat_observation_drift(spec, t, &g.m, &g.pi, y)?);
                Ok(())
            }
            (FilterRunner::Wonham { filter }, RunnerState::Simplex(s)) => {
                let drifts = filter.drifts(t, y);
                out.fill(T::zero());
                for (f, w) in drifts.iter().zip(s.p.iter()) {
                    out.axpy(*w, f, T::one());
                }
                Ok(())
            }
            _ => Err(Error::Validation("filter state does not match the filter kind".into())),
        }
    }

    /// Advances the state over step `k`. `shift` replaces the drifts by
    /// their `P^h` versions (see [`ekf_step`]).
    #[allow(clippy::too_many_arguments)]
    pub fn step(
        &self,
        k: usize,
        t: T,
        state: &mut RunnerState<T>,
        y: &DVector<T>,
        dy: &DVector<T>,
        dt: T,
        shift: Option<&DVector<T>>,
        scratch: &mut DVector<T>,
    ) -> Result<()> {
        match (self, state) {
            (FilterRunner::Kalman { model, schedule }, RunnerState::Gaussian(g)) => {
                let sb = shift.map(|s| &model.lambda * s);
                let sa = shift.map(|s| &model.sigma_y * s);
                schedule.step_mean(model, k, &mut g.m, dy, sb.as_ref(), sa.as_ref(), scratch);
                g.pi.copy_from(&schedule.pi[k + 1]);
                if g.m.iter().any(|v| !v.is_finite_value()) {
                    return Err(Error::Numerical("non-finite filter mean".into()));
                }
                Ok(())
            }
            (FilterRunner::Ekf { spec }, RunnerState::Gaussian(g)) => {
                *g = ekf_step(*spec, t, g, y, dy, dt, shift)?;
                Ok(())
            }
            (FilterRunner::Wonham { filter }, RunnerState::Simplex(s)) => {
                let gram = filter.gram()?;
                *s = filter.step(t, s, y, dy, dt, shift, &gram)?;
                Ok(())
            }
            _ => Err(Error::Validation("filter state does not match the filter kind".into())),
        }
    }

    /// Gram factors of the observation noise at `(t, y)`.
    pub fn gram(&self, spec: &'a ModelSpec<T>, t: T, y: &DVector<T>) -> Result<Cow<'_, ObsGram<T>>> {
        match self {
            FilterRunner::Kalman { schedule, .. } => Ok(Cow::Borrowed(&schedule.gram)),
            _ => spec.obs_gram(t, y).map(|g| Cow::Owned(g.into_owned())),
        }
    }
}

/// `â^Y` under `N(m, P)`: the observation-drift blocks are integrated one
/// by one, then the Itô corrections are applied.
pub fn hat_observation_drift<T: Real>(
    spec: &ModelSpec<T>,
    t: T,
    m: &DVector<T>,
    p: &DMatrix<T>,
    y: &DVector<T>,
) -> Result<DVector<T>> {
    let dims = spec.dims();
    let coef = spec.coefficients();
    let mut out = DVector::zeros(dims.my());
    let blocks = [
        (&coef.bf, dims.factors().start),
        (&coef.a, dims.assets().start),
        (&coef.c, dims.benchmark()),
        (&coef.ae, dims.experts().start),
    ];
    for (map, offset) in blocks {
        let rows = map.shape().0;
        if rows == 0 {
            continue;
        }
        let hat = hat_gaussian(map, t, m, p, y)?;
        out.rows_mut(offset, rows).copy_from(&hat.value);
    }
    let d_sigma = spec.d_sigma(t, y)?;
    let half = T::lit(0.5);
    for (i, v) in dims.assets().zip(d_sigma.iter()) {
        out[i] -= half * *v;
    }
    out[dims.benchmark()] -= half * spec.xi_vector(t, y).norm_squared();
    Ok(out)
}
