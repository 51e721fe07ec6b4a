//! Parametric coefficient families.
//!
//! Coefficients are drawn from a closed registry instead of arbitrary
//! closures so that their structure (constant, affine, quadratic,
//! exponential, tabulated) is known exactly. The separability classifier and
//! the closed-form conditional moments rely on that.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureTag {
    Constant,
    Linear,
    Quadratic,
    Exponential,
    General,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Family<T: Real> {
    /// Fixed output.
    Constant { value: DMatrix<T> },
    /// Element-wise `offset + x_slope · x + y_slope · y`. Slopes are indexed
    /// by the column-major flattened output element.
    Affine {
        offset: DMatrix<T>,
        x_slope: DMatrix<T>,
        y_slope: DMatrix<T>,
    },
    /// Vector output, component `i`: `offset_i + linear_i · x + x' quad_i x`.
    Quadratic {
        offset: DVector<T>,
        linear: DMatrix<T>,
        quad: Vec<DMatrix<T>>,
    },
    /// Vector output, component `i`: `offset_i + scale_i exp(eta_i · x + shift_i)`.
    Exponential {
        offset: DVector<T>,
        scale: DVector<T>,
        eta: DMatrix<T>,
        shift: DVector<T>,
    },
    /// Vector output, piecewise-linear in hidden component `axis`, constant
    /// beyond the end nodes. `values` is `rows × nodes`.
    Tabulated {
        axis: usize,
        nodes: Vec<T>,
        values: DMatrix<T>,
    },
}

/// A coefficient `(t, x, y) ↦ R^{rows × cols}`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientMap<T: Real> {
    rows: usize,
    cols: usize,
    n: usize,
    my: usize,
    family: Family<T>,
}

impl<T: Real> CoefficientMap<T> {
    pub fn new(rows: usize, cols: usize, n: usize, my: usize, family: Family<T>) -> Result<Self> {
        let len = rows * cols;
        let check = |what: &str, ok: bool, expected: String, got: String| {
            if ok {
                Ok(())
            } else {
                Err(Error::shape(what, expected, got))
            }
        };
        let vector_only = |name: &str| {
            if cols != 1 {
                Err(Error::Unsupported(format!("{name} family only supports vector outputs")))
            } else {
                Ok(())
            }
        };
        match &family {
            Family::Constant { value } => check(
                "constant value",
                value.shape() == (rows, cols),
                format!("{rows}x{cols}"),
                format!("{:?}", value.shape()),
            )?,
            Family::Affine {
                offset,
                x_slope,
                y_slope,
            } => {
                check(
                    "affine offset",
                    offset.shape() == (rows, cols),
                    format!("{rows}x{cols}"),
                    format!("{:?}", offset.shape()),
                )?;
                check(
                    "affine x slope",
                    x_slope.shape() == (len, n),
                    format!("{len}x{n}"),
                    format!("{:?}", x_slope.shape()),
                )?;
                check(
                    "affine y slope",
                    y_slope.shape() == (len, my),
                    format!("{len}x{my}"),
                    format!("{:?}", y_slope.shape()),
                )?;
            }
            Family::Quadratic { offset, linear, quad } => {
                vector_only("quadratic")?;
                check("quadratic offset", offset.len() == rows, rows.to_string(), offset.len().to_string())?;
                check(
                    "quadratic linear term",
                    linear.shape() == (rows, n),
                    format!("{rows}x{n}"),
                    format!("{:?}", linear.shape()),
                )?;
                check("quadratic forms", quad.len() == rows, rows.to_string(), quad.len().to_string())?;
                for q in quad {
                    check("quadratic form", q.shape() == (n, n), format!("{n}x{n}"), format!("{:?}", q.shape()))?;
                }
            }
            Family::Exponential {
                offset,
                scale,
                eta,
                shift,
            } => {
                vector_only("exponential")?;
                for (what, v) in [("exponential offset", offset), ("exponential scale", scale), ("exponential shift", shift)] {
                    check(what, v.len() == rows, rows.to_string(), v.len().to_string())?;
                }
                check(
                    "exponential eta",
                    eta.shape() == (rows, n),
                    format!("{rows}x{n}"),
                    format!("{:?}", eta.shape()),
                )?;
            }
            Family::Tabulated { axis, nodes, values } => {
                vector_only("tabulated")?;
                check("tabulated axis", *axis < n, format!("< {n}"), axis.to_string())?;
                check("tabulated nodes", nodes.len() >= 2, ">= 2".into(), nodes.len().to_string())?;
                if nodes.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Scenario("tabulated nodes must be strictly increasing".into()));
                }
                check(
                    "tabulated values",
                    values.shape() == (rows, nodes.len()),
                    format!("{rows}x{}", nodes.len()),
                    format!("{:?}", values.shape()),
                )?;
            }
        }
        // Symmetrize quadratic forms once so Hessians are simply 2Q.
        let family = match family {
            Family::Quadratic { offset, linear, quad } => Family::Quadratic {
                offset,
                linear,
                quad: quad.iter().map(crate::linalg::symmetrize).collect(),
            },
            other => other,
        };
        Ok(Self {
            rows,
            cols,
            n,
            my,
            family,
        })
    }

    pub fn zeros(rows: usize, cols: usize, n: usize, my: usize) -> Self {
        Self {
            rows,
            cols,
            n,
            my,
            family: Family::Constant {
                value: DMatrix::zeros(rows, cols),
            },
        }
    }

    pub fn constant(value: DMatrix<T>, n: usize, my: usize) -> Self {
        let (rows, cols) = value.shape();
        Self {
            rows,
            cols,
            n,
            my,
            family: Family::Constant { value },
        }
    }

    /// Vector-valued affine map `offset + slope · x`.
    pub fn affine_vector(offset: DVector<T>, slope: DMatrix<T>, my: usize) -> Result<Self> {
        let rows = offset.len();
        let n = slope.ncols();
        Self::new(
            rows,
            1,
            n,
            my,
            Family::Affine {
                offset: DMatrix::from_column_slice(rows, 1, offset.as_slice()),
                x_slope: slope,
                y_slope: DMatrix::zeros(rows, my),
            },
        )
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn family(&self) -> &Family<T> {
        &self.family
    }

    pub fn structure(&self) -> StructureTag {
        match &self.family {
            Family::Constant { .. } => StructureTag::Constant,
            Family::Affine { .. } => StructureTag::Linear,
            Family::Quadratic { .. } => StructureTag::Quadratic,
            Family::Exponential { .. } => StructureTag::Exponential,
            Family::Tabulated { .. } => StructureTag::General,
        }
    }

    pub fn is_constant(&self) -> bool {
        match &self.family {
            Family::Constant { .. } => true,
            Family::Affine { x_slope, y_slope, .. } => x_slope.iter().chain(y_slope.iter()).all(|v| *v == T::zero()),
            _ => false,
        }
    }

    /// Whether the declared parameters make the output vary with `y`.
    pub fn depends_on_y(&self) -> bool {
        match &self.family {
            Family::Affine { y_slope, .. } => y_slope.iter().any(|v| *v != T::zero()),
            _ => false,
        }
    }

    /// Multiplies every output by `factor` (structure is preserved).
    pub fn scaled(&self, factor: T) -> Self {
        let family = match &self.family {
            Family::Constant { value } => Family::Constant { value: value * factor },
            Family::Affine {
                offset,
                x_slope,
                y_slope,
            } => Family::Affine {
                offset: offset * factor,
                x_slope: x_slope * factor,
                y_slope: y_slope * factor,
            },
            Family::Quadratic { offset, linear, quad } => Family::Quadratic {
                offset: offset * factor,
                linear: linear * factor,
                quad: quad.iter().map(|q| q * factor).collect(),
            },
            Family::Exponential {
                offset,
                scale,
                eta,
                shift,
            } => Family::Exponential {
                offset: offset * factor,
                scale: scale * factor,
                eta: eta.clone(),
                shift: shift.clone(),
            },
            Family::Tabulated { axis, nodes, values } => Family::Tabulated {
                axis: *axis,
                nodes: nodes.clone(),
                values: values * factor,
            },
        };
        Self { family, ..self.clone() }
    }

    /// Writes the column-major flattened output into `out`.
    pub fn eval_into(&self, _t: T, x: &DVector<T>, y: &DVector<T>, out: &mut [T]) {
        debug_assert_eq!(out.len(), self.rows * self.cols);
        match &self.family {
            Family::Constant { value } => out.copy_from_slice(value.as_slice()),
            Family::Affine {
                offset,
                x_slope,
                y_slope,
            } => {
                for (k, o) in out.iter_mut().enumerate() {
                    let mut v = offset.as_slice()[k];
                    for j in 0..self.n {
                        v += x_slope[(k, j)] * x[j];
                    }
                    for j in 0..self.my {
                        let s = y_slope[(k, j)];
                        if s != T::zero() {
                            v += s * y[j];
                        }
                    }
                    *o = v;
                }
            }
            Family::Quadratic { offset, linear, quad } => {
                for (i, o) in out.iter_mut().enumerate() {
                    let mut v = offset[i];
                    for j in 0..self.n {
                        v += linear[(i, j)] * x[j];
                    }
                    let q = &quad[i];
                    for a in 0..self.n {
                        for b in 0..self.n {
                            v += x[a] * q[(a, b)] * x[b];
                        }
                    }
                    *o = v;
                }
            }
            Family::Exponential {
                offset,
                scale,
                eta,
                shift,
            } => {
                for (i, o) in out.iter_mut().enumerate() {
                    let mut e = shift[i];
                    for j in 0..self.n {
                        e += eta[(i, j)] * x[j];
                    }
                    *o = offset[i] + scale[i] * e.exp();
                }
            }
            Family::Tabulated { axis, nodes, values } => {
                let (lo, w) = bracket(nodes, x[*axis]);
                for (i, o) in out.iter_mut().enumerate() {
                    *o = values[(i, lo)] * (T::one() - w) + values[(i, lo + 1)] * w;
                }
            }
        }
    }

    pub fn eval(&self, t: T, x: &DVector<T>, y: &DVector<T>) -> DMatrix<T> {
        let mut out = DMatrix::zeros(self.rows, self.cols);
        self.eval_into(t, x, y, out.as_mut_slice());
        out
    }

    pub fn eval_vector(&self, t: T, x: &DVector<T>, y: &DVector<T>) -> DVector<T> {
        let mut out = DVector::zeros(self.rows * self.cols);
        self.eval_into(t, x, y, out.as_mut_slice());
        out
    }

    /// Jacobian with respect to `x` of a vector-valued map, `rows × n`.
    pub fn jacobian_x_into(&self, _t: T, x: &DVector<T>, _y: &DVector<T>, out: &mut DMatrix<T>) {
        debug_assert_eq!(out.shape(), (self.rows * self.cols, self.n));
        match &self.family {
            Family::Constant { .. } => out.fill(T::zero()),
            Family::Affine { x_slope, .. } => out.copy_from(x_slope),
            Family::Quadratic { linear, quad, .. } => {
                for i in 0..self.rows {
                    for j in 0..self.n {
                        let mut v = linear[(i, j)];
                        for b in 0..self.n {
                            v += T::lit(2.0) * quad[i][(j, b)] * x[b];
                        }
                        out[(i, j)] = v;
                    }
                }
            }
            Family::Exponential { scale, eta, shift, .. } => {
                for i in 0..self.rows {
                    let mut e = shift[i];
                    for j in 0..self.n {
                        e += eta[(i, j)] * x[j];
                    }
                    let level = scale[i] * e.exp();
                    for j in 0..self.n {
                        out[(i, j)] = level * eta[(i, j)];
                    }
                }
            }
            Family::Tabulated { axis, nodes, values } => {
                out.fill(T::zero());
                let (lo, _) = bracket(nodes, x[*axis]);
                let inside = x[*axis] >= nodes[0] && x[*axis] <= nodes[nodes.len() - 1];
                if inside {
                    let width = nodes[lo + 1] - nodes[lo];
                    for i in 0..self.rows {
                        out[(i, *axis)] = (values[(i, lo + 1)] - values[(i, lo)]) / width;
                    }
                }
            }
        }
    }

    pub fn jacobian_x(&self, t: T, x: &DVector<T>, y: &DVector<T>) -> DMatrix<T> {
        let mut out = DMatrix::zeros(self.rows * self.cols, self.n);
        self.jacobian_x_into(t, x, y, &mut out);
        out
    }

    /// Hessian in `x` of output component `row` (vector maps).
    pub fn hessian_x(&self, _t: T, x: &DVector<T>, _y: &DVector<T>, row: usize) -> DMatrix<T> {
        match &self.family {
            Family::Quadratic { quad, .. } => &quad[row] * T::lit(2.0),
            Family::Exponential { scale, eta, shift, .. } => {
                let mut e = shift[row];
                for j in 0..self.n {
                    e += eta[(row, j)] * x[j];
                }
                let level = scale[row] * e.exp();
                let r = eta.row(row).transpose();
                &r * r.transpose() * level
            }
            // Constant and affine maps are flat; piecewise-linear tables have a
            // zero Hessian away from the nodes.
            _ => DMatrix::zeros(self.n, self.n),
        }
    }
}

/// Index of the left node and interpolation weight, clamped to the table.
fn bracket<T: Real>(nodes: &[T], v: T) -> (usize, T) {
    let last = nodes.len() - 1;
    if v <= nodes[0] {
        return (0, T::zero());
    }
    if v >= nodes[last] {
        return (last - 1, T::one());
    }
    let hi = nodes.partition_point(|&n| n <= v).min(last);
    let lo = hi - 1;
    (lo, (v - nodes[lo]) / (nodes[hi] - nodes[lo]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn affine_matches_its_parts() {
        let f = CoefficientMap::new(
            2,
            1,
            2,
            1,
            Family::Affine {
                offset: DMatrix::from_column_slice(2, 1, &[1.0, -1.0]),
                x_slope: DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 3.0]),
                y_slope: DMatrix::from_row_slice(2, 1, &[0.5, 0.0]),
            },
        )
        .unwrap();
        let out = f.eval_vector(0.0, &v(&[1.0, 1.0]), &v(&[2.0]));
        assert_eq!(out, v(&[5.0, 2.0]));
        assert!(f.depends_on_y());
        assert_eq!(f.structure(), StructureTag::Linear);
    }

    #[test]
    fn quadratic_derivatives() {
        let f = CoefficientMap::new(
            1,
            1,
            1,
            0,
            Family::Quadratic {
                offset: v(&[0.0]),
                linear: DMatrix::zeros(1, 1),
                quad: vec![DMatrix::from_element(1, 1, 1.0)],
            },
        )
        .unwrap();
        let x = v(&[3.0]);
        let y = v(&[]);
        assert_eq!(f.eval_vector(0.0, &x, &y)[0], 9.0);
        assert_eq!(f.jacobian_x(0.0, &x, &y)[(0, 0)], 6.0);
        assert_eq!(f.hessian_x(0.0, &x, &y, 0)[(0, 0)], 2.0);
    }

    #[test]
    fn exponential_jacobian_matches_finite_difference() {
        let f = CoefficientMap::new(
            1,
            1,
            1,
            0,
            Family::Exponential {
                offset: v(&[0.2]),
                scale: v(&[1.5]),
                eta: DMatrix::from_element(1, 1, 0.7),
                shift: v(&[0.1]),
            },
        )
        .unwrap();
        let y = v(&[]);
        let x = 0.4;
        let h = 1e-5;
        let fd = (f.eval_vector(0.0, &v(&[x + h]), &y)[0] - f.eval_vector(0.0, &v(&[x - h]), &y)[0]) / (2.0 * h);
        assert_relative_eq!(f.jacobian_x(0.0, &v(&[x]), &y)[(0, 0)], fd, epsilon = 1e-8);
    }

    #[test]
    fn tabulated_interpolates_and_clamps() {
        let f = CoefficientMap::new(
            1,
            1,
            1,
            0,
            Family::Tabulated {
                axis: 0,
                nodes: vec![0.0, 1.0, 2.0],
                values: DMatrix::from_row_slice(1, 3, &[0.0, 2.0, 0.0]),
            },
        )
        .unwrap();
        let y = v(&[]);
        assert_relative_eq!(f.eval_vector(0.0, &v(&[0.25]), &y)[0], 0.5);
        assert_relative_eq!(f.eval_vector(0.0, &v(&[1.5]), &y)[0], 1.0);
        assert_relative_eq!(f.eval_vector(0.0, &v(&[5.0]), &y)[0], 0.0);
        assert_relative_eq!(f.jacobian_x(0.0, &v(&[1.5]), &y)[(0, 0)], -2.0);
        assert_eq!(f.structure(), StructureTag::General);
    }

    #[test]
    fn shape_errors_are_reported() {
        let err = CoefficientMap::new(
            2,
            1,
            1,
            0,
            Family::Constant {
                value: DMatrix::<f64>::zeros(3, 1),
            },
        );
        assert!(matches!(err, Err(Error::Shape { .. })));
    }
}
