use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{HiddenLaw, ModelSpec};
use crate::linalg::is_positive_definite;
use crate::scalar::Real;

/// Box the validator probes. Coefficients are only required to be sane
/// inside it.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeBox<T: Real> {
    pub x_lo: DVector<T>,
    pub x_hi: DVector<T>,
    pub y_lo: DVector<T>,
    pub y_hi: DVector<T>,
}

impl<T: Real> ProbeBox<T> {
    /// Three standard deviations around the initial mean (or the hull of the
    /// chain states), and `y0 ± 1`.
    pub fn around(spec: &ModelSpec<T>) -> Self {
        let n = spec.dims().n;
        let (x_lo, x_hi) = match spec.x0() {
            HiddenLaw::Gaussian { mean, cov } => {
                let mut lo = mean.clone();
                let mut hi = mean.clone();
                for i in 0..n {
                    let sd = cov[(i, i)].max(T::zero()).sqrt();
                    let w = if sd > T::zero() { T::lit(3.0) * sd } else { T::one() };
                    lo[i] -= w;
                    hi[i] += w;
                }
                (lo, hi)
            }
            HiddenLaw::Categorical { states, .. } => {
                let mut lo = states[0].clone();
                let mut hi = states[0].clone();
                for s in states {
                    lo = lo.inf(s);
                    hi = hi.sup(s);
                }
                for i in 0..n {
                    if hi[i] == lo[i] {
                        lo[i] -= T::one();
                        hi[i] += T::one();
                    }
                }
                (lo, hi)
            }
        };
        let ones = DVector::from_element(spec.y0().len(), T::one());
        Self {
            x_lo,
            x_hi,
            y_lo: spec.y0() - &ones,
            y_hi: spec.y0() + &ones,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbePoint {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub invariant: String,
    pub probe: ProbePoint,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

pub const SIGMA_SINGULAR: &str = "ΣΣ' singular";
pub const GRAM_SINGULAR: &str = "Σ^YΣ^Y' singular";
pub const OBSERVED_DIFFUSION_DEPENDS_ON_X: &str = "observed diffusion depends on x";
pub const INVALID_GENERATOR: &str = "invalid generator";
pub const INVALID_INITIAL_LAW: &str = "invalid initial law";

/// Probes the model on a 3×3×3 lattice in `(t, x, y)`.
pub fn validate<T: Real>(spec: &ModelSpec<T>) -> ValidationReport {
    let bx = spec.probe().cloned().unwrap_or_else(|| ProbeBox::around(spec));
    let half = T::lit(0.5);
    let levels_x = [bx.x_lo.clone(), (&bx.x_lo + &bx.x_hi) * half, bx.x_hi.clone()];
    let levels_y = [bx.y_lo.clone(), (&bx.y_lo + &bx.y_hi) * half, bx.y_hi.clone()];
    let horizon = spec.horizon();
    let times = [T::zero(), horizon * half, horizon];
    let coef = spec.coefficients();
    let mut violations = Vec::new();

    violations.extend(check_initial_law(spec));

    for &t in &times {
        for x in &levels_x {
            for y in &levels_y {
                let point = || ProbePoint {
                    t: t.as_f64(),
                    x: x.iter().map(|v| v.as_f64()).collect(),
                    y: y.iter().map(|v| v.as_f64()).collect(),
                };
                let sigma = coef.sigma.eval(t, x, y);
                if !is_positive_definite(&(&sigma * sigma.transpose())) {
                    violations.push(Violation {
                        invariant: SIGMA_SINGULAR.into(),
                        probe: point(),
                    });
                }
                if !observation_gram_ok(spec, t, x, y) {
                    violations.push(Violation {
                        invariant: GRAM_SINGULAR.into(),
                        probe: point(),
                    });
                }
                if observed_diffusion_moves(spec, t, x, y, &levels_x) {
                    violations.push(Violation {
                        invariant: OBSERVED_DIFFUSION_DEPENDS_ON_X.into(),
                        probe: point(),
                    });
                }
            }
        }
    }
    ValidationReport {
        ok: violations.is_empty(),
        violations,
    }
}

/// Rows of `Σ^Y` that are exactly zero carry no noise; they are harmless only
/// if their drift does not depend on the hidden state. The remaining rows
/// must have a positive definite Gram matrix.
fn observation_gram_ok<T: Real>(spec: &ModelSpec<T>, t: T, x: &DVector<T>, y: &DVector<T>) -> bool {
    let (_, sy) = match spec.assemble_observation(t, x, y) {
        Ok(v) => v,
        Err(_) => return false,
    };
    let jac = {
        let mut j = DMatrix::zeros(spec.dims().my(), spec.dims().n);
        super::StateSpace::obs_drift_jacobian(spec, t, x, y, &mut j);
        j
    };
    let active: Vec<usize> = (0..sy.nrows())
        .filter(|&i| sy.row(i).iter().any(|v| *v != T::zero()))
        .collect();
    let silent_but_informative = (0..sy.nrows())
        .filter(|i| !active.contains(i))
        .any(|i| jac.row(i).iter().any(|v| *v != T::zero()));
    if silent_but_informative || active.is_empty() {
        return false;
    }
    let reduced = sy.select_rows(active.iter());
    is_positive_definite(&(&reduced * reduced.transpose()))
}

fn observed_diffusion_moves<T: Real>(
    spec: &ModelSpec<T>,
    t: T,
    x: &DVector<T>,
    y: &DVector<T>,
    levels: &[DVector<T>; 3],
) -> bool {
    let n = spec.dims().n;
    let mut others: Vec<DVector<T>> = levels.to_vec();
    // Per-axis moves, so slopes cannot cancel across components.
    for i in 0..n {
        let mut z = x.clone();
        z[i] = if x[i] == levels[2][i] { levels[0][i] } else { levels[2][i] };
        others.push(z);
    }
    spec.coefficients().observed_diffusions().iter().any(|(_, map)| {
        if map.shape().0 == 0 {
            return false;
        }
        let base = map.eval(t, x, y);
        others.iter().any(|z| map.eval(t, z, y) != base)
    })
}

fn check_initial_law<T: Real>(spec: &ModelSpec<T>) -> Vec<Violation> {
    let at_origin = |invariant: &str| Violation {
        invariant: invariant.into(),
        probe: ProbePoint {
            t: 0.0,
            x: spec.x0().mean().iter().map(|v| v.as_f64()).collect(),
            y: spec.y0().iter().map(|v| v.as_f64()).collect(),
        },
    };
    let mut out = Vec::new();
    match spec.x0() {
        HiddenLaw::Gaussian { cov, .. } => {
            let sym = (cov - cov.transpose()).abs().max() <= T::lit(1e-12) * (T::one() + cov.abs().max());
            if !sym || crate::linalg::min_eigenvalue(cov) < -T::lit(1e-12) * (T::one() + cov.trace().abs()) {
                out.push(at_origin(INVALID_INITIAL_LAW));
            }
        }
        HiddenLaw::Categorical { probs, generator, .. } => {
            let total: T = probs.iter().copied().fold(T::zero(), |a, b| a + b);
            if probs.iter().any(|p| *p < T::zero()) || (total - T::one()).abs() > T::lit(1e-9) {
                out.push(at_origin(INVALID_INITIAL_LAW));
            }
            if crate::filter::check_generator(generator).is_err() {
                out.push(at_origin(INVALID_GENERATOR));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CoefficientMap, Coefficients, Dimensions, Family};

    fn base(sigma: DMatrix<f64>, m: usize) -> (Dimensions, Coefficients<f64>) {
        let dims = Dimensions::new(0, 1, m, 1, 0).unwrap();
        let (my, d) = (dims.my(), dims.d());
        let mut coef = Coefficients::zeros(&dims);
        let mut lam = DMatrix::zeros(1, d);
        lam[(0, 0)] = 1.0;
        coef.lambda = CoefficientMap::constant(lam, 1, my);
        coef.sigma = CoefficientMap::constant(sigma, 1, my);
        let mut xi = DMatrix::zeros(1, d);
        xi[(0, d - 1)] = 0.1;
        coef.xi = CoefficientMap::constant(xi, 1, my);
        (dims, coef)
    }

    fn spec(dims: Dimensions, coef: Coefficients<f64>) -> ModelSpec<f64> {
        ModelSpec::new(
            dims,
            coef,
            HiddenLaw::Gaussian {
                mean: DVector::zeros(1),
                cov: DMatrix::identity(1, 1),
            },
            DVector::zeros(dims.my()),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn identity_row_is_fine() {
        let (dims, coef) = base(DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 0.0]), 1);
        let r = validate(&spec(dims, coef));
        assert!(r.ok, "{:?}", r.violations);
    }

    #[test]
    fn repeated_rows_are_singular() {
        let sigma = DMatrix::from_row_slice(2, 4, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let (dims, coef) = base(sigma, 2);
        let r = validate(&spec(dims, coef));
        assert!(!r.ok);
        assert!(r.violations.iter().any(|v| v.invariant == SIGMA_SINGULAR));
        assert!(r.violations.len() >= 27);
    }

    #[test]
    fn x_dependent_observed_diffusion_is_flagged() {
        let dims = Dimensions::new(1, 1, 1, 1, 0).unwrap();
        let (my, d) = (dims.my(), dims.d());
        let mut coef = Coefficients::zeros(&dims);
        coef.lambda = CoefficientMap::constant(DMatrix::from_row_slice(1, d, &[0.0, 1.0, 0.0, 0.0]), 1, my);
        coef.sigma = CoefficientMap::constant(DMatrix::from_row_slice(1, d, &[0.0, 0.0, 1.0, 0.0]), 1, my);
        coef.xi = CoefficientMap::constant(DMatrix::from_row_slice(1, d, &[0.0, 0.0, 0.0, 1.0]), 1, my);
        let mut slope = DMatrix::zeros(d, 1);
        slope[(0, 0)] = 0.5;
        coef.lambdaf = CoefficientMap::new(
            1,
            d,
            1,
            my,
            Family::Affine {
                offset: DMatrix::from_row_slice(1, d, &[1.0, 0.0, 0.0, 0.0]),
                x_slope: slope,
                y_slope: DMatrix::zeros(d, my),
            },
        )
        .unwrap();
        let r = validate(&spec(dims, coef));
        assert!(r.violations.iter().any(|v| v.invariant == OBSERVED_DIFFUSION_DEPENDS_ON_X));
    }

    #[test]
    fn deterministic_report() {
        let sigma = DMatrix::from_row_slice(2, 4, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let (dims, coef) = base(sigma, 2);
        let s = spec(dims, coef);
        assert_eq!(validate(&s), validate(&s));
    }
}
