//! Filter-parameter dynamics under `P̂^h`, in the form the density solver
//! consumes: drift, diffusion matrix and `ĝ` as functions of `(t, ζ)`.

use nalgebra::{DMatrix, DVector};

use crate::criteria::{g_from_parts, RiskSensitiveParams};
use crate::error::{Error, Result};
use crate::filter::{kalman_gain, FilterKind, KalmanSchedule, WonhamFilter};
use crate::linalg::ObsGram;
use crate::model::{HiddenLaw, LinearGaussianModel, ModelSpec, StateSpace};
use crate::sde::Strategy;

/// Drift, diffusion and source of an autonomous `ζ` diffusion.
pub trait ZetaGenerator: Sync {
    fn dim(&self) -> usize;

    fn zeta0(&self) -> Vec<f64>;

    /// Writes the drift and the row-major diffusion matrix at `(t, ζ)` and
    /// returns `ĝ(t, ζ)`.
    fn eval(&self, t: f64, zeta: &[f64], drift: &mut [f64], diffusion: &mut [f64]) -> f64;

    /// Hard limits of the state space, if it has any.
    fn bounds(&self) -> Option<Vec<(f64, f64)>> {
        None
    }
}

/// Observation-level constants shared by both filter families.
struct ReturnPart {
    sigma_y: DMatrix<f64>,
    sigma1: DMatrix<f64>,
    xi: DVector<f64>,
    d_sigma: DVector<f64>,
    tradable: std::ops::Range<usize>,
    bench: usize,
}

impl ReturnPart {
    fn new(spec: &ModelSpec<f64>) -> Result<Self> {
        let dims = spec.dims();
        let y0 = spec.y0();
        let mut sigma_y = DMatrix::zeros(dims.my(), dims.d());
        spec.obs_diffusion(0.0, y0, &mut sigma_y);
        Ok(Self {
            sigma1: spec.sigma1(0.0, y0),
            xi: spec.xi_vector(0.0, y0),
            d_sigma: spec.d_sigma(0.0, y0)?,
            sigma_y,
            tradable: dims.tradable(),
            bench: dims.benchmark(),
        })
    }

    /// `(s, ĝ)` for the strategy value `h` and `â^Y`.
    fn shift_and_g(&self, theta: f64, h: &DVector<f64>, hat_ay: &DVector<f64>) -> (DVector<f64>, f64) {
        let sh = self.sigma1.transpose() * h;
        let a1 = DVector::from_fn(self.tradable.len(), |i, _| {
            hat_ay[self.tradable.start + i] + 0.5 * self.d_sigma[i]
        });
        let c = hat_ay[self.bench] + 0.5 * self.xi.norm_squared();
        let g = g_from_parts(theta, h, &sh, &self.xi, &a1, c);
        ((sh - &self.xi) * theta, g)
    }
}

enum Kind {
    /// `ζ = m` with `Π` precomputed on a half-step grid.
    Kalman {
        model: LinearGaussianModel<f64>,
        gains: Vec<DMatrix<f64>>,
        half_dt: f64,
    },
    /// `ζ = p¹` for a two-state chain.
    Wonham2 {
        generator: DMatrix<f64>,
        drifts: [DVector<f64>; 2],
        gram: ObsGram<f64>,
        p0: f64,
    },
}

pub struct AutonomousZetaDynamics<'a> {
    kind: Kind,
    strategy: &'a Strategy<f64>,
    theta: f64,
    ret: ReturnPart,
}

/// Observation-level coefficients must not depend on `y`.
fn check_autonomous(spec: &ModelSpec<f64>) -> Result<()> {
    for (name, map) in spec.coefficients().named() {
        if map.depends_on_y() {
            return Err(Error::Unsupported(format!(
                "coefficient `{name}` depends on y; the density solver needs autonomous filter dynamics"
            )));
        }
    }
    Ok(())
}

/// `steps` steps of size `dt` over the horizon; the Kalman gain is
/// tabulated at every half step.
pub fn build_generator<'a>(
    spec: &'a ModelSpec<f64>,
    strategy: &'a Strategy<f64>,
    params: &RiskSensitiveParams<f64>,
    kind: FilterKind,
    dt: f64,
    steps: usize,
) -> Result<AutonomousZetaDynamics<'a>> {
    params.check()?;
    check_autonomous(spec)?;
    let ret = ReturnPart::new(spec)?;
    let kind = match kind {
        FilterKind::Kf => {
            let model = spec.to_linear_gaussian().ok_or_else(|| {
                Error::Unsupported("the Kalman generator needs a linear-Gaussian model".into())
            })?;
            if model.m0.len() > 2 {
                return Err(Error::Unsupported(format!(
                    "density grids are limited to two dimensions, the filter mean has {}",
                    model.m0.len()
                )));
            }
            strategy.check(spec.dims().m1, model.m0.len())?;
            let schedule = KalmanSchedule::new(&model, dt / 2.0, 2 * steps)?;
            let gains = schedule
                .pi
                .iter()
                .map(|p| kalman_gain(p, &model.a, &model.lambda, &model.sigma_y, &schedule.gram))
                .collect();
            Kind::Kalman {
                gains,
                half_dt: dt / 2.0,
                model,
            }
        }
        FilterKind::Wonham => {
            let filter = WonhamFilter::new(spec)?;
            if filter.states.len() != 2 {
                return Err(Error::Unsupported(format!(
                    "the Wonham density solver handles two states, got {}",
                    filter.states.len()
                )));
            }
            strategy.check(spec.dims().m1, 2)?;
            let d = filter.drifts(0.0, spec.y0());
            let gram = filter.gram()?.into_owned();
            let HiddenLaw::Categorical { probs, .. } = spec.x0() else {
                unreachable!("checked by the filter");
            };
            Kind::Wonham2 {
                generator: filter.generator.clone(),
                drifts: [d[0].clone(), d[1].clone()],
                gram,
                p0: probs[0],
            }
        }
        other => {
            return Err(Error::Unsupported(format!(
                "the {other:?} filter has stochastic covariance; the density solver supports kf and wonham"
            )))
        }
    };
    Ok(AutonomousZetaDynamics {
        kind,
        strategy,
        theta: params.theta,
        ret,
    })
}

impl AutonomousZetaDynamics<'_> {
    /// Drift, diffusion `HΣ^Y` and `ĝ` at `(t, ζ)` as nalgebra values.
    pub fn coefficients(&self, t: f64, zeta: &[f64]) -> (DVector<f64>, DMatrix<f64>, f64) {
        let theta = self.theta;
        match &self.kind {
            Kind::Kalman {
                model, gains, half_dt, ..
            } => {
                let m = DVector::from_column_slice(zeta);
                let j = ((t / half_dt).round() as usize).min(gains.len() - 1);
                let k = &gains[j];
                let hat_ay = &model.a0 + &model.a * &m;
                let h = self.strategy.eval(t, &m);
                let (s, g) = self.ret.shift_and_g(theta, &h, &hat_ay);
                let drift = &model.b0 + &model.b * &m - k * (&self.ret.sigma_y * s);
                (drift, k * &self.ret.sigma_y, g)
            }
            Kind::Wonham2 {
                generator, drifts, gram, ..
            } => {
                let p1 = zeta[0];
                let p = DVector::from_column_slice(&[p1, 1.0 - p1]);
                let hat_ay = &drifts[0] * p1 + &drifts[1] * (1.0 - p1);
                let delta = &drifts[0] - &drifts[1];
                let h = self.strategy.eval(t, &p);
                let (s, g) = self.ret.shift_and_g(theta, &h, &hat_ay);
                let q1 = p1 * generator[(0, 0)] + (1.0 - p1) * generator[(1, 0)];
                let w = p1 * (1.0 - p1);
                // H = w Δ'S⁻¹ (a row); HΣ^Y s is the shift of the drift.
                let hrow = (&gram.inv * &delta).transpose() * w;
                let hs = (&hrow * &self.ret.sigma_y * s)[(0, 0)];
                let drift = DVector::from_element(1, q1 - hs);
                let hs_row = hrow * &self.ret.sigma_y;
                (drift, DMatrix::from_row_slice(1, hs_row.len(), hs_row.as_slice()), g)
            }
        }
    }
}

impl ZetaGenerator for AutonomousZetaDynamics<'_> {
    fn dim(&self) -> usize {
        match &self.kind {
            Kind::Kalman { model, .. } => model.m0.len(),
            Kind::Wonham2 { .. } => 1,
        }
    }

    fn zeta0(&self) -> Vec<f64> {
        match &self.kind {
            Kind::Kalman { model, .. } => model.m0.iter().copied().collect(),
            Kind::Wonham2 { p0, .. } => vec![*p0],
        }
    }

    fn eval(&self, t: f64, zeta: &[f64], drift: &mut [f64], diffusion: &mut [f64]) -> f64 {
        let (mu, hs, g) = self.coefficients(t, zeta);
        let dmat = &hs * hs.transpose();
        drift.copy_from_slice(mu.as_slice());
        let q = mu.len();
        for i in 0..q {
            for j in 0..q {
                diffusion[i * q + j] = dmat[(i, j)];
            }
        }
        g
    }

    fn bounds(&self) -> Option<Vec<(f64, f64)>> {
        match &self.kind {
            Kind::Kalman { .. } => None,
            Kind::Wonham2 { .. } => Some(vec![(0.0, 1.0)]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CoefficientMap, Coefficients, Dimensions};

    fn lg(y_dependent: bool) -> ModelSpec<f64> {
        let dims = Dimensions::new(0, 1, 1, 1, 0).unwrap();
        let my = dims.my();
        let mut coef = Coefficients::zeros(&dims);
        coef.b = CoefficientMap::affine_vector(DVector::from_element(1, 0.02), DMatrix::from_element(1, 1, -1.0), my).unwrap();
        coef.lambda = CoefficientMap::constant(DMatrix::from_row_slice(1, 3, &[0.1, 0.0, 0.0]), 1, my);
        coef.a = CoefficientMap::affine_vector(DVector::from_element(1, 0.04), DMatrix::from_element(1, 1, 0.5), my).unwrap();
        if y_dependent {
            coef.a = CoefficientMap::new(
                1,
                1,
                1,
                my,
                crate::model::Family::Affine {
                    offset: DMatrix::from_element(1, 1, 0.04),
                    x_slope: DMatrix::from_element(1, 1, 0.5),
                    y_slope: DMatrix::from_row_slice(1, 2, &[0.1, 0.0]),
                },
            )
            .unwrap();
        }
        coef.sigma = CoefficientMap::constant(DMatrix::from_row_slice(1, 3, &[0.0, 0.2, 0.0]), 1, my);
        coef.xi = CoefficientMap::constant(DMatrix::from_row_slice(1, 3, &[0.0, 0.1, 0.1]), 1, my);
        ModelSpec::new(
            dims,
            coef,
            HiddenLaw::Gaussian {
                mean: DVector::from_element(1, 0.02),
                cov: DMatrix::from_element(1, 1, 0.005),
            },
            DVector::zeros(my),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn y_dependence_names_the_coefficient() {
        let spec = lg(true);
        let strat = Strategy::constant(&[0.5]);
        let p = RiskSensitiveParams::new(0.5, 1.0, 1.0).unwrap();
        match build_generator(&spec, &strat, &p, FilterKind::Kf, 0.01, 100) {
            Err(Error::Unsupported(msg)) => assert!(msg.contains("`a`"), "{msg}"),
            Err(e) => panic!("wrong error {e}"),
            Ok(_) => panic!("expected an error"),
        }
    }

    #[test]
    fn null_shift_leaves_filter_drift() {
        // h'Σ¹ = Ξ needs Σ¹ ∝ Ξ; here use h = 0 with Ξ on the asset column only.
        let spec = lg(false);
        let strat = Strategy::constant(&[0.0]);
        let p = RiskSensitiveParams::new(0.5, 1.0, 1.0).unwrap();
        let gen = build_generator(&spec, &strat, &p, FilterKind::Kf, 0.01, 100).unwrap();
        let (drift, _, _) = gen.coefficients(0.0, &[0.1]);
        // b0 + Bm − K Σ^Y s with s = −θΞ'.
        let Kind::Kalman { model, gains, .. } = &gen.kind else { unreachable!() };
        let s = -spec.xi_vector(0.0, spec.y0()) * 0.5;
        let expect = 0.02 - 0.1 - (&gains[0] * (&model.sigma_y * s))[0];
        assert!((drift[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn ekf_is_refused() {
        let spec = lg(false);
        let strat = Strategy::constant(&[0.5]);
        let p = RiskSensitiveParams::new(0.5, 1.0, 1.0).unwrap();
        assert!(matches!(
            build_generator(&spec, &strat, &p, FilterKind::Ekf, 0.01, 100),
            Err(Error::Unsupported(_))
        ));
    }
}
