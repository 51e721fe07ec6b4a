//! Gauss–Hermite quadrature for Gaussian expectations.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, sym_sqrt, symmetrize};
use crate::rng::{normal, PathRng};
use crate::scalar::Real;

/// Nodes and weights for `∫ f(z) φ(z) dz` with `φ` the standard normal
/// density (probabilists' Hermite), via Golub–Welsch.
#[derive(Clone, Debug)]
pub struct GaussHermite<T: Real> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> GaussHermite<T> {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::Validation("quadrature order must be positive".into()));
        }
        // Jacobi matrix of the monic probabilists' Hermite recurrence:
        // off-diagonal entries sqrt(k). Eigen-decomposition in f64 regardless
        // of T so f32 callers still get accurate nodes.
        let jacobi = DMatrix::<f64>::from_fn(order, order, |i, j| {
            if i + 1 == j || j + 1 == i {
                (i.max(j) as f64).sqrt()
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = (0..order)
            .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        Ok(Self {
            nodes: pairs.iter().map(|p| T::lit(p.0)).collect(),
            weights: pairs.iter().map(|p| T::lit(p.1 / total)).collect(),
        })
    }
}

pub const DEFAULT_ORDER: usize = 20;
/// Tensor grids are used up to this dimension; Monte Carlo beyond.
pub const MAX_TENSOR_DIM: usize = 3;
pub const MC_SAMPLES: usize = 200_000;

/// A Gaussian expectation and, for the Monte-Carlo fallback, its standard
/// error (zero for quadrature).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Expectation<T> {
    pub value: T,
    pub stderr: T,
}

fn check_cov<T: Real>(mean: &DVector<T>, cov: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = mean.len();
    if cov.shape() != (n, n) {
        return Err(Error::shape("covariance", format!("{n}x{n}"), format!("{:?}", cov.shape())));
    }
    let sym = symmetrize(cov);
    let tol = T::lit(1e-10) * (T::one() + sym.trace().abs());
    if n > 0 && min_eigenvalue(&sym) < -tol {
        return Err(Error::Numerical("covariance is not positive semi-definite".into()));
    }
    Ok(sym_sqrt(&sym))
}

/// `E f(X)` for `X ~ N(mean, cov)` on a tensor Gauss–Hermite grid.
pub fn gaussian_expectation<T: Real>(
    mean: &DVector<T>,
    cov: &DMatrix<T>,
    order: usize,
    f: impl Fn(&DVector<T>) -> T,
) -> Result<T> {
    let n = mean.len();
    if n > MAX_TENSOR_DIM {
        return Err(Error::Unsupported(format!(
            "tensor quadrature is capped at {MAX_TENSOR_DIM} dimensions (got {n})"
        )));
    }
    let root = check_cov(mean, cov)?;
    let rule = GaussHermite::<T>::new(order)?;
    let mut idx = vec![0usize; n];
    let mut z = DVector::zeros(n);
    let mut total = T::zero();
    loop {
        let mut w = T::one();
        for (j, &i) in idx.iter().enumerate() {
            z[j] = rule.nodes[i];
            w *= rule.weights[i];
        }
        let x = mean + &root * &z;
        total += w * f(&x);
        // odometer over the tensor grid
        let mut j = 0;
        loop {
            if j == n {
                return Ok(total);
            }
            idx[j] += 1;
            if idx[j] < order {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

/// Plain Monte-Carlo expectation with its standard error.
pub fn gaussian_expectation_mc<T: Real>(
    mean: &DVector<T>,
    cov: &DMatrix<T>,
    samples: usize,
    rng: &mut PathRng,
    f: impl Fn(&DVector<T>) -> T,
) -> Result<Expectation<T>> {
    let root = check_cov(mean, cov)?;
    let n = mean.len();
    let mut z = DVector::zeros(n);
    let (mut s1, mut s2) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        for v in z.iter_mut() {
            *v = normal(rng);
        }
        let v = f(&(mean + &root * &z)).as_f64();
        s1 += v;
        s2 += v * v;
    }
    let n_s = samples as f64;
    let m = s1 / n_s;
    let var = (s2 / n_s - m * m).max(0.0) * n_s / (n_s - 1.0).max(1.0);
    Ok(Expectation {
        value: T::lit(m),
        stderr: T::lit((var / n_s).sqrt()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weights_sum_to_one_and_nodes_are_symmetric() {
        let r = GaussHermite::<f64>::new(7).unwrap();
        assert_relative_eq!(r.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(r.nodes[0], -r.nodes[6], epsilon = 1e-12);
        assert!(r.nodes[3].abs() < 1e-12);
    }

    #[test]
    fn polynomial_exactness() {
        // order 2 integrates degree 3 exactly: E[(1 + X)^3], X ~ N(0.5, 2)
        let m = DVector::<f64>::from_element(1, 0.5);
        let p = DMatrix::from_element(1, 1, 2.0);
        let v = gaussian_expectation(&m, &p, 2, |x| (1.0f64 + x[0]).powi(3)).unwrap();
        // E[(1.5 + Z√2)^3] = 1.5^3 + 3·1.5·2
        assert_relative_eq!(v, 3.375 + 9.0, epsilon = 1e-12);
    }

    #[test]
    fn lognormal_mean() {
        let m = DVector::zeros(1);
        let p = DMatrix::<f64>::identity(1, 1);
        let v = gaussian_expectation(&m, &p, 20, |x| x[0].exp()).unwrap();
        assert_relative_eq!(v, 0.5f64.exp(), epsilon = 1e-12);
    }

    #[test]
    fn rejects_indefinite_covariance() {
        let m = DVector::zeros(2);
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(gaussian_expectation(&m, &p, 5, |_| 1.0), Err(Error::Numerical(_))));
    }
}
