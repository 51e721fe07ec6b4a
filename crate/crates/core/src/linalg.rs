//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub fn symmetrize<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.transpose()) * T::lit(0.5)
}

/// Scale-free definiteness test: smallest eigenvalue above
/// `ratio * largest eigenvalue`, with a strictly positive largest eigenvalue.
pub fn is_positive_definite<T: Real>(m: &DMatrix<T>) -> bool {
    if m.nrows() == 0 {
        return true;
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    max > T::zero() && min > T::definiteness_ratio() * max
}

/// Symmetric PSD square root via eigendecomposition. Negative eigenvalues
/// (round-off) are floored at zero.
pub fn sym_sqrt<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    map_eigenvalues(m, |l| if l > T::zero() { l.sqrt() } else { T::zero() })
}

/// Symmetric inverse square root of a positive definite matrix.
pub fn sym_inv_sqrt<T: Real>(m: &DMatrix<T>) -> Result<DMatrix<T>> {
    if !is_positive_definite(m) {
        return Err(Error::SingularGram {
            name: "matrix passed to sym_inv_sqrt".into(),
        });
    }
    Ok(map_eigenvalues(m, |l| T::one() / l.sqrt()))
}

/// Symmetrizes and floors eigenvalues at zero.
pub fn psd_floor<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    if m.nrows() == 0 {
        return m.clone();
    }
    let s = symmetrize(m);
    let eig = SymmetricEigen::new(s.clone());
    if eig.eigenvalues.iter().all(|&l| l >= T::zero()) {
        return s;
    }
    let floored = eig.eigenvalues.map(|l| if l > T::zero() { l } else { T::zero() });
    symmetrize(&(&eig.eigenvectors * DMatrix::from_diagonal(&floored) * eig.eigenvectors.transpose()))
}

pub fn map_eigenvalues<T: Real>(m: &DMatrix<T>, f: impl Fn(T) -> T) -> DMatrix<T> {
    if m.nrows() == 0 {
        return m.clone();
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let mapped = eig.eigenvalues.map(f);
    let out = &eig.eigenvectors * DMatrix::from_diagonal(&mapped) * eig.eigenvectors.transpose();
    symmetrize(&out)
}

pub fn min_eigenvalue<T: Real>(m: &DMatrix<T>) -> T {
    if m.nrows() == 0 {
        return T::zero();
    }
    SymmetricEigen::new(symmetrize(m)).eigenvalues.min()
}

/// Lower-triangular half-vectorization, column by column.
pub fn vech<T: Real>(m: &DMatrix<T>) -> Vec<T> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for j in 0..n {
        for i in j..n {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn unvech<T: Real>(v: &[T], n: usize) -> DMatrix<T> {
    let mut m = DMatrix::zeros(n, n);
    let mut idx = 0;
    for j in 0..n {
        for i in j..n {
            m[(i, j)] = v[idx];
            m[(j, i)] = v[idx];
            idx += 1;
        }
    }
    m
}

/// Factorization of the observation Gram matrix `Σ^Y Σ^Y'`.
///
/// Rows of `Σ^Y` that are exactly zero belong to noise-free, state independent
/// observation components (a zeroed benchmark block, for instance). They carry
/// no information, so they are dropped before inverting and the factors are
/// embedded back with zero rows and columns.
#[derive(Clone, Debug)]
pub struct ObsGram<T: Real> {
    pub gram: DMatrix<T>,
    pub inv: DMatrix<T>,
    pub inv_sqrt: DMatrix<T>,
    pub sqrt: DMatrix<T>,
    pub active: Vec<bool>,
}

impl<T: Real> ObsGram<T> {
    pub fn new(sigma_y: &DMatrix<T>) -> Result<Self> {
        let my = sigma_y.nrows();
        let active: Vec<bool> = (0..my)
            .map(|i| sigma_y.row(i).iter().any(|&v| v != T::zero()))
            .collect();
        let idx: Vec<usize> = (0..my).filter(|&i| active[i]).collect();
        let gram = sigma_y * sigma_y.transpose();
        let reduced = DMatrix::from_fn(idx.len(), idx.len(), |i, j| gram[(idx[i], idx[j])]);
        if idx.is_empty() || !is_positive_definite(&reduced) {
            return Err(Error::SingularGram {
                name: "Σ^Y Σ^Y'".into(),
            });
        }
        let eig = SymmetricEigen::new(symmetrize(&reduced));
        let build = |f: &dyn Fn(T) -> T| {
            let vals = eig.eigenvalues.map(f);
            let small = symmetrize(&(&eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()));
            let mut full = DMatrix::zeros(my, my);
            for (a, &i) in idx.iter().enumerate() {
                for (b, &j) in idx.iter().enumerate() {
                    full[(i, j)] = small[(a, b)];
                }
            }
            full
        };
        let inv = build(&|l| T::one() / l);
        let inv_sqrt = build(&|l| T::one() / l.sqrt());
        let sqrt = build(&|l| l.sqrt());
        Ok(Self {
            gram,
            inv,
            inv_sqrt,
            sqrt,
            active,
        })
    }

    /// `u' (Σ^YΣ^Y')^{-1} v`
    pub fn inner(&self, u: &DVector<T>, v: &DVector<T>) -> T {
        (u.transpose() * &self.inv * v)[(0, 0)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sqrt_squares_back() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let r = sym_sqrt(&m);
        assert_relative_eq!(&r * &r, m, epsilon = 1e-12);
        let ri = sym_inv_sqrt(&m).unwrap();
        assert_relative_eq!(&ri * &m * &ri, DMatrix::identity(2, 2), epsilon = 1e-12);
    }

    #[test]
    fn definiteness_is_scale_free() {
        let m = DMatrix::from_row_slice(2, 2, &[1e-8, 0.0, 0.0, 2e-8]);
        assert!(is_positive_definite(&m));
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(!is_positive_definite(&s));
    }

    #[test]
    fn floor_removes_negative_modes() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-3]);
        let f = psd_floor(&m);
        assert!(min_eigenvalue(&f) >= 0.0);
        assert_relative_eq!(f[(0, 0)], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn vech_round_trip() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0]);
        let v = vech(&m);
        assert_eq!(v, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(unvech(&v, 3), m);
    }

    #[test]
    fn gram_drops_null_rows() {
        let s = DMatrix::from_row_slice(2, 3, &[0.2, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let g = ObsGram::new(&s).unwrap();
        assert_eq!(g.active, vec![true, false]);
        assert_relative_eq!(g.inv[(0, 0)], 25.0, epsilon = 1e-12);
        assert_eq!(g.inv[(1, 1)], 0.0);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(ObsGram::new(&bad), Err(Error::SingularGram { .. })));
    }
}
