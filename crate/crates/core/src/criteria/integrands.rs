//! Pathwise integrands of the risk-sensitive criteria.

use nalgebra::{DMatrix, DVector};

use crate::scalar::Real;

/// `g = ((θ+1)/2) h'Σ¹Σ¹'h − h'a¹ − θ h'Σ¹Ξ' + c + ((θ−1)/2) ΞΞ'`.
///
/// `sigma1_h` is `Σ^{(1)'} h` (a `d`-vector) so callers can reuse it.
#[inline]
pub fn g_from_parts<T: Real>(theta: T, h: &DVector<T>, sigma1_h: &DVector<T>, xi: &DVector<T>, a1: &DVector<T>, c: T) -> T {
    let half = T::lit(0.5);
    (theta + T::one()) * half * sigma1_h.norm_squared() - h.dot(a1) - theta * sigma1_h.dot(xi)
        + c
        + (theta - T::one()) * half * xi.norm_squared()
}

pub fn g_integrand<T: Real>(theta: T, h: &DVector<T>, sigma1: &DMatrix<T>, xi: &DVector<T>, a1: &DVector<T>, c: T) -> T {
    g_from_parts(theta, h, &(sigma1.transpose() * h), xi, a1, c)
}

/// Same formula with the hat coefficients.
pub fn g_hat_integrand<T: Real>(
    theta: T,
    h: &DVector<T>,
    sigma1: &DMatrix<T>,
    xi: &DVector<T>,
    a1_hat: &DVector<T>,
    c_hat: T,
) -> T {
    g_integrand(theta, h, sigma1, xi, a1_hat, c_hat)
}

/// Running log of a Doléans exponential,
/// `log χ += −θ u·dW − ½ θ² |u|² dt`, with `u = Σ^{(1)'}h − Ξ'`.
#[inline]
pub fn doleans_increment<T: Real>(theta: T, u: &DVector<T>, dw: &DVector<T>, dt: T) -> T {
    -theta * u.dot(dw) - T::lit(0.5) * theta * theta * u.norm_squared() * dt
}

/// `log Ψ += ǎ' S⁻¹ Σ^Y dW̃^h + ½ ǎ' S⁻¹ ǎ dt`.
#[inline]
pub fn psi_increment<T: Real>(a_check: &DVector<T>, s_inv: &DMatrix<T>, sigma_y_dw: &DVector<T>, dt: T) -> T {
    let w = s_inv * a_check;
    w.dot(sigma_y_dw) + T::lit(0.5) * w.dot(a_check) * dt
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn small_cases() {
        let s1 = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let xi0 = v(&[0.0, 0.0]);
        assert_relative_eq!(g_integrand(0.5, &v(&[0.0]), &s1, &xi0, &v(&[0.3]), 0.05), 0.05);
        assert_relative_eq!(g_integrand(1.0, &v(&[1.0]), &s1, &xi0, &v(&[0.1]), 0.0), 0.9, epsilon = 1e-15);
    }

    #[test]
    fn null_integrand_keeps_chi_at_one() {
        let u = v(&[0.0, 0.0]);
        assert_eq!(doleans_increment(2.0, &u, &v(&[0.3, -0.1]), 0.01), 0.0);
    }
}
