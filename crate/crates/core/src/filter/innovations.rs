//! Innovations increments.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::ObsGram;
use crate::scalar::Real;

/// Increments of the innovations Wiener process `W̃` (minimum-norm
/// representative, `d`-dimensional) and of the standardized innovation `U`
/// (`mY`-dimensional).
#[derive(Clone, Debug, PartialEq)]
pub struct Innovation<T: Real> {
    pub dw_tilde: DVector<T>,
    pub du: DVector<T>,
}

pub fn innovations_increment<T: Real>(
    sigma_y: &DMatrix<T>,
    gram: &ObsGram<T>,
    dy: &DVector<T>,
    hat_ay: &DVector<T>,
    dt: T,
) -> Result<Innovation<T>> {
    if dy.len() != sigma_y.nrows() || hat_ay.len() != sigma_y.nrows() {
        return Err(Error::shape("innovation", sigma_y.nrows(), dy.len().max(hat_ay.len())));
    }
    let resid = dy - hat_ay * dt;
    Ok(Innovation {
        dw_tilde: sigma_y.transpose() * (&gram.inv * &resid),
        du: &gram.inv_sqrt * resid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identity_diffusion_passes_residual_through() {
        let s = DMatrix::identity(2, 2);
        let g = ObsGram::new(&s).unwrap();
        let dy = DVector::from_column_slice(&[0.3, -0.1]);
        let a = DVector::from_column_slice(&[1.0, 2.0]);
        let inn = innovations_increment(&s, &g, &dy, &a, 0.1).unwrap();
        assert_relative_eq!(inn.du, &dy - &a * 0.1, epsilon = 1e-15);
        assert_relative_eq!(&s * &inn.dw_tilde, &dy - &a * 0.1, epsilon = 1e-15);
    }

    #[test]
    fn exact_drift_gives_zero() {
        let s = DMatrix::from_row_slice(1, 2, &[0.3, 0.4]);
        let g = ObsGram::new(&s).unwrap();
        let a = DVector::from_element(1, 0.2);
        let inn = innovations_increment(&s, &g, &(&a * 0.5), &a, 0.5).unwrap();
        assert!(inn.du.iter().all(|v| *v == 0.0));
        assert!(inn.dw_tilde.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn minimum_norm_reconstructs_observation_noise() {
        let s = DMatrix::from_row_slice(2, 3, &[0.2, 0.1, 0.0, 0.0, 0.3, 0.4]);
        let g = ObsGram::new(&s).unwrap();
        let dy = DVector::from_column_slice(&[0.05, -0.02]);
        let a = DVector::zeros(2);
        let inn = innovations_increment(&s, &g, &dy, &a, 1.0).unwrap();
        assert_relative_eq!(&s * &inn.dw_tilde, dy, epsilon = 1e-14);
    }
}
