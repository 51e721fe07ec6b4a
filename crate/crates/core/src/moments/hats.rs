//! Conditional expectations of coefficients under the filter law.

use nalgebra::{DMatrix, DVector};

use super::quadrature::{gaussian_expectation, gaussian_expectation_mc, DEFAULT_ORDER, MAX_TENSOR_DIM, MC_SAMPLES};
use crate::error::{Error, Result};
use crate::model::{CoefficientMap, Family};
use crate::rng::stream_rng;
use crate::scalar::Real;

pub fn hat_linear<T: Real>(a0: &DVector<T>, a: &DMatrix<T>, m: &DVector<T>) -> DVector<T> {
    a0 + a * m
}

/// `E[a x² + b x + c]` for scalar `x ~ N(m, p)`.
pub fn hat_quadratic<T: Real>(a: T, b: T, c: T, m: T, p: T) -> T {
    a * (m * m + p) + b * m + c
}

/// Second-order expansion `a(m) + ½ tr(a_xx(m) P)`.
pub fn hat_quadratic_expansion<T: Real>(a_at_m: T, hess_at_m: &DMatrix<T>, p: &DMatrix<T>) -> T {
    a_at_m + T::lit(0.5) * (hess_at_m * p).trace()
}

/// Gaussian moment generating function `E exp(η x) = exp(η m + ½ η² P)`.
pub fn hat_exponential<T: Real>(eta: T, m: T, p: T) -> Result<T> {
    let exponent = eta * m + T::lit(0.5) * eta * eta * p;
    let v = exponent.exp();
    if !v.is_finite_value() {
        return Err(Error::Overflow {
            what: "exponential hat coefficient".into(),
            exponent: exponent.as_f64(),
        });
    }
    Ok(v)
}

pub fn hat_simplex<T: Real>(f: &DVector<T>, p: &DVector<T>) -> T {
    f.dot(p)
}

/// How a conditional expectation was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HatMethod {
    Exact,
    Expansion,
    Quadrature,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HatValue<T: Real> {
    pub value: DVector<T>,
    /// Non-zero only for Monte-Carlo integration.
    pub stderr: DVector<T>,
    pub method: HatMethod,
}

/// `∫ f(t, x, y) N(m, P)(dx)` component-wise: tensor Gauss–Hermite for
/// `n ≤ 3`, Monte Carlo beyond.
pub fn hat_quadrature<T: Real>(
    map: &CoefficientMap<T>,
    t: T,
    m: &DVector<T>,
    p: &DMatrix<T>,
    y: &DVector<T>,
    order: usize,
) -> Result<HatValue<T>> {
    let (r, c) = map.shape();
    let len = r * c;
    let mut value = DVector::zeros(len);
    let mut stderr = DVector::zeros(len);
    let method = if m.len() <= MAX_TENSOR_DIM {
        HatMethod::Quadrature
    } else {
        HatMethod::MonteCarlo
    };
    for i in 0..len {
        let f = |x: &DVector<T>| {
            let mut out = vec![T::zero(); len];
            map.eval_into(t, x, y, &mut out);
            out[i]
        };
        match method {
            HatMethod::Quadrature => value[i] = gaussian_expectation(m, p, order, f)?,
            _ => {
                let mut rng = stream_rng(0x5eed, i as u64);
                let e = gaussian_expectation_mc(m, p, MC_SAMPLES, &mut rng, f)?;
                value[i] = e.value;
                stderr[i] = e.stderr;
            }
        }
    }
    Ok(HatValue { value, stderr, method })
}

/// Conditional expectation of a coefficient under `N(m, P)`, using the
/// closed form of its family where one exists.
pub fn hat_gaussian<T: Real>(
    map: &CoefficientMap<T>,
    t: T,
    m: &DVector<T>,
    p: &DMatrix<T>,
    y: &DVector<T>,
) -> Result<HatValue<T>> {
    let len = map.shape().0 * map.shape().1;
    let exact = |value| HatValue {
        value,
        stderr: DVector::zeros(len),
        method: HatMethod::Exact,
    };
    let n = m.len();
    match map.family() {
        Family::Constant { .. } | Family::Affine { .. } => Ok(exact(map.eval_vector(t, m, y))),
        Family::Quadratic { offset, linear, quad } => {
            if n == 1 {
                let v = DVector::from_iterator(
                    len,
                    (0..len).map(|i| hat_quadratic(quad[i][(0, 0)], linear[(i, 0)], offset[i], m[0], p[(0, 0)])),
                );
                Ok(exact(v))
            } else {
                // The expansion is exact on quadratics.
                let at_m = map.eval_vector(t, m, y);
                let v = DVector::from_iterator(
                    len,
                    (0..len).map(|i| hat_quadratic_expansion(at_m[i], &map.hessian_x(t, m, y, i), p)),
                );
                Ok(HatValue {
                    value: v,
                    stderr: DVector::zeros(len),
                    method: HatMethod::Expansion,
                })
            }
        }
        Family::Exponential {
            offset,
            scale,
            eta,
            shift,
        } if n == 1 => {
            let mut v = DVector::zeros(len);
            for i in 0..len {
                v[i] = offset[i] + scale[i] * shift[i].exp() * hat_exponential(eta[(i, 0)], m[0], p[(0, 0)])?;
            }
            Ok(exact(v))
        }
        _ => hat_quadrature(map, t, m, p, y, DEFAULT_ORDER),
    }
}

/// `Σ_i p_i f(t, x^i, y)` over the chain states.
pub fn hat_on_states<T: Real>(
    map: &CoefficientMap<T>,
    t: T,
    states: &[DVector<T>],
    p: &DVector<T>,
    y: &DVector<T>,
) -> DVector<T> {
    let len = map.shape().0 * map.shape().1;
    let mut out = DVector::zeros(len);
    for (x, w) in states.iter().zip(p.iter()) {
        out.axpy(*w, &map.eval_vector(t, x, y), T::one());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_forms() {
        assert_eq!(hat_linear(&DVector::from_element(1, 2.0), &DMatrix::from_element(1, 1, 3.0), &DVector::from_element(1, 1.0))[0], 5.0);
        assert_eq!(hat_quadratic(1.0, 0.0, 0.0, 2.0, 3.0), 7.0);
        assert_relative_eq!(hat_exponential(1.0, 0.0, 1.0).unwrap(), 0.5f64.exp(), epsilon = 1e-15);
        assert_eq!(hat_exponential(0.0, 3.0, 2.0).unwrap(), 1.0);
        let uniform = DVector::from_element(2, 0.5);
        assert_eq!(hat_simplex(&DVector::from_column_slice(&[1.0, 3.0]), &uniform), 2.0);
    }

    #[test]
    fn expansion_error_on_exponential() {
        let p = DMatrix::from_element(1, 1, 0.01);
        let expansion: f64 = hat_quadratic_expansion(1.0, &DMatrix::from_element(1, 1, 1.0), &p);
        assert_relative_eq!(expansion, 1.005, epsilon = 1e-15);
        let exact: f64 = hat_exponential(1.0, 0.0, 0.01).unwrap();
        assert!((exact - expansion).abs() < 2e-5 && (exact - expansion).abs() > 1e-6);
    }

    #[test]
    fn overflow_is_reported() {
        assert!(matches!(hat_exponential(1.0, 800.0, 0.0), Err(Error::Overflow { .. })));
    }
}
