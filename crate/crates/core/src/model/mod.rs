//! The partially observed market: hidden factors `X`, observable factors
//! `F`, log asset prices, the log benchmark and expert signals, all driven by
//! one `d`-dimensional Wiener process.

mod coefficient;
mod validate;

pub use coefficient::{CoefficientMap, Family, StructureTag};
pub use validate::{validate, ProbeBox, ProbePoint, ValidationReport, Violation};

use std::borrow::Cow;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ObsGram;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimensions {
    pub ell: usize,
    pub n: usize,
    pub m: usize,
    pub m1: usize,
    pub k: usize,
}

impl Dimensions {
    pub fn new(ell: usize, n: usize, m: usize, m1: usize, k: usize) -> Result<Self> {
        let dims = Self { ell, n, m, m1, k };
        dims.check()?;
        Ok(dims)
    }

    pub fn check(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Scenario("at least one hidden factor is required (n >= 1)".into()));
        }
        if self.m1 == 0 || self.m1 > self.m {
            return Err(Error::Scenario(format!(
                "tradable assets must satisfy 1 <= m1 <= m (m1 = {}, m = {})",
                self.m1, self.m
            )));
        }
        Ok(())
    }

    pub fn m2(&self) -> usize {
        self.m - self.m1
    }

    /// Driving-noise dimension.
    pub fn d(&self) -> usize {
        self.ell + self.n + self.m + self.k + 1
    }

    /// Observation dimension.
    pub fn my(&self) -> usize {
        self.ell + self.m + self.k + 1
    }

    pub fn factors(&self) -> Range<usize> {
        0..self.ell
    }

    pub fn assets(&self) -> Range<usize> {
        self.ell..self.ell + self.m
    }

    pub fn tradable(&self) -> Range<usize> {
        self.ell..self.ell + self.m1
    }

    pub fn benchmark(&self) -> usize {
        self.ell + self.m
    }

    pub fn experts(&self) -> Range<usize> {
        self.ell + self.m + 1..self.my()
    }
}

/// Law of the hidden state at time zero.
#[derive(Clone, Debug, PartialEq)]
pub enum HiddenLaw<T: Real> {
    Gaussian { mean: DVector<T>, cov: DMatrix<T> },
    /// A finite-state Markov chain on `states` with intensity matrix
    /// `generator`; `probs` is the initial distribution.
    Categorical {
        states: Vec<DVector<T>>,
        probs: DVector<T>,
        generator: DMatrix<T>,
    },
}

impl<T: Real> HiddenLaw<T> {
    pub fn mean(&self) -> DVector<T> {
        match self {
            HiddenLaw::Gaussian { mean, .. } => mean.clone(),
            HiddenLaw::Categorical { states, probs, .. } => {
                let mut out = DVector::zeros(states[0].len());
                for (s, p) in states.iter().zip(probs.iter()) {
                    out += s * *p;
                }
                out
            }
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self, HiddenLaw::Categorical { .. })
    }
}

/// The full coefficient set.
#[derive(Clone, Debug, PartialEq)]
pub struct Coefficients<T: Real> {
    pub b: CoefficientMap<T>,
    pub lambda: CoefficientMap<T>,
    pub bf: CoefficientMap<T>,
    pub lambdaf: CoefficientMap<T>,
    pub a: CoefficientMap<T>,
    pub sigma: CoefficientMap<T>,
    pub c: CoefficientMap<T>,
    pub xi: CoefficientMap<T>,
    pub ae: CoefficientMap<T>,
    pub sigmae: CoefficientMap<T>,
}

impl<T: Real> Coefficients<T> {
    /// All-zero coefficients of the right shapes.
    pub fn zeros(dims: &Dimensions) -> Self {
        let (n, my, d) = (dims.n, dims.my(), dims.d());
        let z = |r, c| CoefficientMap::zeros(r, c, n, my);
        Self {
            b: z(n, 1),
            lambda: z(n, d),
            bf: z(dims.ell, 1),
            lambdaf: z(dims.ell, d),
            a: z(dims.m, 1),
            sigma: z(dims.m, d),
            c: z(1, 1),
            xi: z(1, d),
            ae: z(dims.k, 1),
            sigmae: z(dims.k, d),
        }
    }

    pub fn named(&self) -> [(&'static str, &CoefficientMap<T>); 10] {
        [
            ("b", &self.b),
            ("lambda", &self.lambda),
            ("bf", &self.bf),
            ("lambdaf", &self.lambdaf),
            ("a", &self.a),
            ("sigma", &self.sigma),
            ("c", &self.c),
            ("xi", &self.xi),
            ("aE", &self.ae),
            ("sigmaE", &self.sigmae),
        ]
    }

    /// The observed-process diffusions, which must not depend on x.
    pub fn observed_diffusions(&self) -> [(&'static str, &CoefficientMap<T>); 4] {
        [
            ("lambdaf", &self.lambdaf),
            ("sigma", &self.sigma),
            ("xi", &self.xi),
            ("sigmaE", &self.sigmae),
        ]
    }
}

/// Observation coefficients that do not vary along a path.
#[derive(Clone, Debug)]
struct ConstantObservation<T: Real> {
    sigma_y: DMatrix<T>,
    d_sigma: DVector<T>,
    xi_sq: T,
    gram: Option<ObsGram<T>>,
}

/// Interface the filters and the simulator need from a model.
///
/// Buffers are passed in so the per-step hot loops do not allocate.
pub trait StateSpace<T: Real>: Sync {
    fn state_dim(&self) -> usize;
    fn obs_dim(&self) -> usize;
    fn noise_dim(&self) -> usize;

    fn state_drift(&self, t: T, x: &DVector<T>, y: &DVector<T>, out: &mut DVector<T>);
    fn state_drift_jacobian(&self, t: T, x: &DVector<T>, y: &DVector<T>, out: &mut DMatrix<T>);
    fn state_diffusion(&self, t: T, x: &DVector<T>, y: &DVector<T>, out: &mut DMatrix<T>);

    fn obs_drift(&self, t: T, x: &DVector<T>, y: &DVector<T>, out: &mut DVector<T>);
    fn obs_drift_jacobian(&self, t: T, x: &DVector<T>, y: &DVector<T>, out: &mut DMatrix<T>);
    fn obs_diffusion(&self, t: T, y: &DVector<T>, out: &mut DMatrix<T>);

    /// `Σ^Y Σ^Y'` factors at `(t, y)`.
    fn obs_gram(&self, t: T, y: &DVector<T>) -> Result<Cow<'_, ObsGram<T>>> {
        let mut s = DMatrix::zeros(self.obs_dim(), self.noise_dim());
        self.obs_diffusion(t, y, &mut s);
        ObsGram::new(&s).map(Cow::Owned)
    }

    /// Whether `obs_diffusion` is the same at every `(t, y)`.
    fn obs_diffusion_is_constant(&self) -> bool {
        false
    }

    /// Whether `state_diffusion` is the same at every `(t, x, y)`.
    fn state_diffusion_is_constant(&self) -> bool {
        false
    }
}

#[derive(Clone, Debug)]
pub struct ModelSpec<T: Real> {
    dims: Dimensions,
    coef: Coefficients<T>,
    x0: HiddenLaw<T>,
    y0: DVector<T>,
    horizon: T,
    probe: Option<ProbeBox<T>>,
    constant_obs: Option<ConstantObservation<T>>,
}

impl<T: Real> ModelSpec<T> {
    pub fn new(dims: Dimensions, coef: Coefficients<T>, x0: HiddenLaw<T>, y0: DVector<T>, horizon: T) -> Result<Self> {
        dims.check()?;
        let (n, my, d) = (dims.n, dims.my(), dims.d());
        let expect = [
            ("b", (n, 1)),
            ("lambda", (n, d)),
            ("bf", (dims.ell, 1)),
            ("lambdaf", (dims.ell, d)),
            ("a", (dims.m, 1)),
            ("sigma", (dims.m, d)),
            ("c", (1, 1)),
            ("xi", (1, d)),
            ("aE", (dims.k, 1)),
            ("sigmaE", (dims.k, d)),
        ];
        for ((name, map), (_, shape)) in coef.named().iter().zip(expect.iter()) {
            if map.shape() != *shape {
                return Err(Error::shape(
                    format!("coefficient {name}"),
                    format!("{}x{}", shape.0, shape.1),
                    format!("{}x{}", map.shape().0, map.shape().1),
                ));
            }
        }
        if y0.len() != my {
            return Err(Error::shape("y0", my, y0.len()));
        }
        if horizon <= T::zero() {
            return Err(Error::Scenario("horizon must be positive".into()));
        }
        match &x0 {
            HiddenLaw::Gaussian { mean, cov } => {
                if mean.len() != n {
                    return Err(Error::shape("x0 mean", n, mean.len()));
                }
                if cov.shape() != (n, n) {
                    return Err(Error::shape("x0 cov", format!("{n}x{n}"), format!("{:?}", cov.shape())));
                }
            }
            HiddenLaw::Categorical {
                states,
                probs,
                generator,
            } => {
                let s = states.len();
                if s == 0 || states.iter().any(|v| v.len() != n) {
                    return Err(Error::shape("x0 states", format!("non-empty list of {n}-vectors"), s));
                }
                if probs.len() != s {
                    return Err(Error::shape("x0 probs", s, probs.len()));
                }
                if generator.shape() != (s, s) {
                    return Err(Error::shape("generator", format!("{s}x{s}"), format!("{:?}", generator.shape())));
                }
            }
        }
        let mut spec = Self {
            dims,
            coef,
            x0,
            y0,
            horizon,
            probe: None,
            constant_obs: None,
        };
        spec.constant_obs = spec.build_constant_observation();
        Ok(spec)
    }

    fn build_constant_observation(&self) -> Option<ConstantObservation<T>> {
        if !self.coef.observed_diffusions().iter().all(|(_, m)| m.is_constant()) {
            return None;
        }
        let zero_x = DVector::zeros(self.dims.n);
        let mut sigma_y = DMatrix::zeros(self.dims.my(), self.dims.d());
        self.stack_diffusion(T::zero(), &zero_x, &self.y0, &mut sigma_y);
        let sigma = self.coef.sigma.eval(T::zero(), &zero_x, &self.y0);
        let xi = self.coef.xi.eval(T::zero(), &zero_x, &self.y0);
        Some(ConstantObservation {
            gram: ObsGram::new(&sigma_y).ok(),
            d_sigma: diag_outer(&sigma),
            xi_sq: xi.norm_squared(),
            sigma_y,
        })
    }

    pub fn with_probe(mut self, probe: ProbeBox<T>) -> Self {
        self.probe = Some(probe);
        self
    }

    /// Rebuilds the spec with a modified coefficient set.
    pub fn with_coefficients(&self, coef: Coefficients<T>) -> Result<Self> {
        let spec = Self::new(self.dims, coef, self.x0.clone(), self.y0.clone(), self.horizon)?;
        Ok(match &self.probe {
            Some(p) => spec.with_probe(p.clone()),
            None => spec,
        })
    }

    pub fn with_x0(&self, x0: HiddenLaw<T>) -> Result<Self> {
        let spec = Self::new(self.dims, self.coef.clone(), x0, self.y0.clone(), self.horizon)?;
        Ok(match &self.probe {
            Some(p) => spec.with_probe(p.clone()),
            None => spec,
        })
    }

    pub fn dims(&self) -> &Dimensions {
        &self.dims
    }

    pub fn coefficients(&self) -> &Coefficients<T> {
        &self.coef
    }

    pub fn x0(&self) -> &HiddenLaw<T> {
        &self.x0
    }

    pub fn y0(&self) -> &DVector<T> {
        &self.y0
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn probe(&self) -> Option<&ProbeBox<T>> {
        self.probe.as_ref()
    }

    /// Diagonal of `ΣΣ'` at `(t, y)`.
    pub fn d_sigma(&self, t: T, y: &DVector<T>) -> Result<DVector<T>> {
        if y.len() != self.dims.my() {
            return Err(Error::shape("y", self.dims.my(), y.len()));
        }
        if let Some(c) = &self.constant_obs {
            return Ok(c.d_sigma.clone());
        }
        let sigma = self.coef.sigma.eval(t, &DVector::zeros(self.dims.n), y);
        Ok(diag_outer(&sigma))
    }

    /// Stacked observation drift `a^Y` and diffusion `Σ^Y`.
    pub fn assemble_observation(&self, t: T, x: &DVector<T>, y: &DVector<T>) -> Result<(DVector<T>, DMatrix<T>)> {
        if x.len() != self.dims.n {
            return Err(Error::shape("x", self.dims.n, x.len()));
        }
        if y.len() != self.dims.my() {
            return Err(Error::shape("y", self.dims.my(), y.len()));
        }
        let mut ay = DVector::zeros(self.dims.my());
        let mut sy = DMatrix::zeros(self.dims.my(), self.dims.d());
        StateSpace::obs_drift(self, t, x, y, &mut ay);
        StateSpace::obs_diffusion(self, t, y, &mut sy);
        Ok((ay, sy))
    }

    /// The first `m1` rows of `Σ`.
    pub fn sigma1(&self, t: T, y: &DVector<T>) -> DMatrix<T> {
        let sigma = self.coef.sigma.eval(t, &DVector::zeros(self.dims.n), y);
        sigma.rows(0, self.dims.m1).into_owned()
    }

    /// `Ξ` as a `d`-vector.
    pub fn xi_vector(&self, t: T, y: &DVector<T>) -> DVector<T> {
        self.coef.xi.eval_vector(t, &DVector::zeros(self.dims.n), y)
    }

    /// The first `m1` components of `a`.
    pub fn a1(&self, t: T, x: &DVector<T>, y: &DVector<T>) -> DVector<T> {
        let a = self.coef.a.eval_vector(t, x, y);
        a.rows(0, self.dims.m1).into_owned()
    }

    pub fn benchmark_drift(&self, t: T, x: &DVector<T>, y: &DVector<T>) -> T {
        let mut out = [T::zero()];
        self.coef.c.eval_into(t, x, y, &mut out);
        out[0]
    }

    /// Linear-Gaussian view: affine drifts with constant diffusions, Gaussian
    /// initial law. `None` otherwise.
    pub fn to_linear_gaussian(&self) -> Option<LinearGaussianModel<T>> {
        let HiddenLaw::Gaussian { mean, cov } = &self.x0 else {
            return None;
        };
        let drifts = [&self.coef.b, &self.coef.bf, &self.coef.a, &self.coef.c, &self.coef.ae];
        let affine_free_of_y = |m: &CoefficientMap<T>| {
            matches!(m.structure(), StructureTag::Constant | StructureTag::Linear) && !m.depends_on_y()
        };
        if !drifts.iter().all(|m| affine_free_of_y(m)) || !self.coef.lambda.is_constant() {
            return None;
        }
        let c = self.constant_obs.as_ref()?;
        let zero = DVector::zeros(self.dims.n);
        let mut b0 = DVector::zeros(self.dims.n);
        let mut bmat = DMatrix::zeros(self.dims.n, self.dims.n);
        let mut a0 = DVector::zeros(self.dims.my());
        let mut amat = DMatrix::zeros(self.dims.my(), self.dims.n);
        let mut lambda = DMatrix::zeros(self.dims.n, self.dims.d());
        StateSpace::state_drift(self, T::zero(), &zero, &self.y0, &mut b0);
        StateSpace::state_drift_jacobian(self, T::zero(), &zero, &self.y0, &mut bmat);
        StateSpace::obs_drift(self, T::zero(), &zero, &self.y0, &mut a0);
        StateSpace::obs_drift_jacobian(self, T::zero(), &zero, &self.y0, &mut amat);
        StateSpace::state_diffusion(self, T::zero(), &zero, &self.y0, &mut lambda);
        Some(LinearGaussianModel {
            b0,
            b: bmat,
            lambda,
            a0,
            a: amat,
            sigma_y: c.sigma_y.clone(),
            m0: mean.clone(),
            p0: cov.clone(),
        })
    }

    fn stack_diffusion(&self, t: T, x: &DVector<T>, y: &DVector<T>, out: &mut DMatrix<T>) {
        let d = self.dims.d();
        let mut offset = 0;
        for map in [&self.coef.lambdaf, &self.coef.sigma, &self.coef.xi, &self.coef.sigmae] {
            let rows = map.shape().0;
            if rows == 0 {
                continue;
            }
            let block = map.eval(t, x, y);
            out.view_mut((offset, 0), (rows, d)).copy_from(&block);
            offset += rows;
        }
    }
}

/// `diag(M M')`.
fn diag_outer<T: Real>(m: &DMatrix<T>) -> DVector<T> {
    DVector::from_iterator(m.nrows(), m.row_iter().map(|r| r.norm_squared()))
}

impl<T: Real> StateSpace<T> for ModelSpec<T> {
    fn state_dim(&self) -> usize {
        self.dims.n
    }

    fn obs_dim(&self) -> usize {
        self.dims.my()
    }

    fn noise_dim(&self) -> usize {
        self.dims.d()
    }

    fn state_drift(&self, t: T, x: &DVector<T>, y: &DVector<T>, out: &mut DVector<T>) {
        self.coef.b.eval_into(t, x, y, out.as_mut_slice());
    }

    fn state_drift_jacobian(&self, t: T, x: &DVector<T>, y: &DVector<T>, out: &mut DMatrix<T>) {
        self.coef.b.jacobian_x_into(t, x, y, out);
    }

    fn state_diffusion(&self, t: T, x: &DVector<T>, y: &DVector<T>, out: &mut DMatrix<T>) {
        self.coef.lambda.eval_into(t, x, y, out.as_mut_slice());
    }

    fn obs_drift(&self, t: T, x: &DVector<T>, y: &DVector<T>, out: &mut DVector<T>) {
        let dims = &self.dims;
        let buf = out.as_mut_slice();
        self.coef.bf.eval_into(t, x, y, &mut buf[dims.factors()]);
        self.coef.a.eval_into(t, x, y, &mut buf[dims.assets()]);
        self.coef.c.eval_into(t, x, y, &mut buf[dims.benchmark()..dims.benchmark() + 1]);
        self.coef.ae.eval_into(t, x, y, &mut buf[dims.experts()]);
        let half = T::lit(0.5);
        let (d_sigma, xi_sq) = match &self.constant_obs {
            Some(c) => (Cow::Borrowed(&c.d_sigma), c.xi_sq),
            None => {
                let sigma = self.coef.sigma.eval(t, x, y);
                let xi = self.coef.xi.eval(t, x, y);
                (Cow::Owned(diag_outer(&sigma)), xi.norm_squared())
            }
        };
        for (i, v) in dims.assets().zip(d_sigma.iter()) {
            buf[i] -= half * *v;
        }
        buf[dims.benchmark()] -= half * xi_sq;
    }

    fn obs_drift_jacobian(&self, t: T, x: &DVector<T>, y: &DVector<T>, out: &mut DMatrix<T>) {
        let dims = &self.dims;
        let n = dims.n;
        let blocks = [
            (&self.coef.bf, dims.ell, 0),
            (&self.coef.a, dims.m, dims.ell),
            (&self.coef.c, 1, dims.benchmark()),
            (&self.coef.ae, dims.k, dims.benchmark() + 1),
        ];
        for (map, rows, offset) in blocks {
            if rows == 0 {
                continue;
            }
            let jac = map.jacobian_x(t, x, y);
            out.view_mut((offset, 0), (rows, n)).copy_from(&jac);
        }
    }

    fn obs_diffusion(&self, t: T, y: &DVector<T>, out: &mut DMatrix<T>) {
        match &self.constant_obs {
            Some(c) => out.copy_from(&c.sigma_y),
            None => self.stack_diffusion(t, &DVector::zeros(self.dims.n), y, out),
        }
    }

    fn obs_gram(&self, t: T, y: &DVector<T>) -> Result<Cow<'_, ObsGram<T>>> {
        match &self.constant_obs {
            Some(ConstantObservation { gram: Some(g), .. }) => Ok(Cow::Borrowed(g)),
            Some(ConstantObservation { gram: None, .. }) => Err(Error::SingularGram {
                name: "Σ^Y Σ^Y'".into(),
            }),
            None => {
                let mut s = DMatrix::zeros(self.dims.my(), self.dims.d());
                self.obs_diffusion(t, y, &mut s);
                ObsGram::new(&s).map(Cow::Owned)
            }
        }
    }

    fn obs_diffusion_is_constant(&self) -> bool {
        self.constant_obs.is_some()
    }

    fn state_diffusion_is_constant(&self) -> bool {
        self.coef.lambda.is_constant()
    }
}

/// `dX = (b0 + B X) dt + Λ dW`, `dY = (a0 + A X) dt + Σ^Y dW` with constant
/// matrices and Gaussian `X0 ~ N(m0, P0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearGaussianModel<T: Real> {
    pub b0: DVector<T>,
    pub b: DMatrix<T>,
    pub lambda: DMatrix<T>,
    pub a0: DVector<T>,
    pub a: DMatrix<T>,
    pub sigma_y: DMatrix<T>,
    pub m0: DVector<T>,
    pub p0: DMatrix<T>,
}

impl<T: Real> LinearGaussianModel<T> {
    pub fn check(&self) -> Result<()> {
        let n = self.b0.len();
        let my = self.a0.len();
        let d = self.lambda.ncols();
        let ok = self.b.shape() == (n, n)
            && self.lambda.nrows() == n
            && self.a.shape() == (my, n)
            && self.sigma_y.shape() == (my, d)
            && self.m0.len() == n
            && self.p0.shape() == (n, n);
        if ok {
            Ok(())
        } else {
            Err(Error::shape("linear-Gaussian model", "consistent n, mY, d", "mismatched blocks"))
        }
    }
}

impl<T: Real> StateSpace<T> for LinearGaussianModel<T> {
    fn state_dim(&self) -> usize {
        self.b0.len()
    }

    fn obs_dim(&self) -> usize {
        self.a0.len()
    }

    fn noise_dim(&self) -> usize {
        self.lambda.ncols()
    }

    fn state_drift(&self, _t: T, x: &DVector<T>, _y: &DVector<T>, out: &mut DVector<T>) {
        out.copy_from(&self.b0);
        out.gemv(T::one(), &self.b, x, T::one());
    }

    fn state_drift_jacobian(&self, _t: T, _x: &DVector<T>, _y: &DVector<T>, out: &mut DMatrix<T>) {
        out.copy_from(&self.b);
    }

    fn state_diffusion(&self, _t: T, _x: &DVector<T>, _y: &DVector<T>, out: &mut DMatrix<T>) {
        out.copy_from(&self.lambda);
    }

    fn obs_drift(&self, _t: T, x: &DVector<T>, _y: &DVector<T>, out: &mut DVector<T>) {
        out.copy_from(&self.a0);
        out.gemv(T::one(), &self.a, x, T::one());
    }

    fn obs_drift_jacobian(&self, _t: T, _x: &DVector<T>, _y: &DVector<T>, out: &mut DMatrix<T>) {
        out.copy_from(&self.a);
    }

    fn obs_diffusion(&self, _t: T, _y: &DVector<T>, out: &mut DMatrix<T>) {
        out.copy_from(&self.sigma_y);
    }

    fn obs_diffusion_is_constant(&self) -> bool {
        true
    }

    fn state_diffusion_is_constant(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dm(r: usize, c: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(r, c, v)
    }

    /// n = 1, m = 1, no factors or experts: d = 3, mY = 2.
    fn small_spec(sigma: &[f64], xi: &[f64]) -> ModelSpec<f64> {
        let dims = Dimensions::new(0, 1, 1, 1, 0).unwrap();
        let mut coef = Coefficients::zeros(&dims);
        coef.lambda = CoefficientMap::constant(dm(1, 3, &[1.0, 0.0, 0.0]), 1, 2);
        coef.sigma = CoefficientMap::constant(dm(1, 3, sigma), 1, 2);
        coef.xi = CoefficientMap::constant(dm(1, 3, xi), 1, 2);
        coef.a = CoefficientMap::affine_vector(DVector::from_element(1, 0.1), dm(1, 1, &[1.0]), 2).unwrap();
        coef.c = CoefficientMap::affine_vector(DVector::from_element(1, 0.03), dm(1, 1, &[0.5]), 2).unwrap();
        ModelSpec::new(
            dims,
            coef,
            HiddenLaw::Gaussian {
                mean: DVector::zeros(1),
                cov: DMatrix::identity(1, 1),
            },
            DVector::zeros(2),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn dimension_counts() {
        let d = Dimensions::new(1, 2, 3, 2, 1).unwrap();
        assert_eq!(d.d(), 1 + 2 + 3 + 1 + 1);
        assert_eq!(d.my(), 1 + 3 + 1 + 1);
        assert_eq!(d.m2() + d.m1, d.m);
        assert!(Dimensions::new(0, 0, 1, 1, 0).is_err());
        assert!(Dimensions::new(0, 1, 1, 2, 0).is_err());
    }

    #[test]
    fn observation_stacks_drift_corrections() {
        let spec = small_spec(&[0.0, 0.2, 0.0], &[0.0, 0.1, 0.1]);
        let x = DVector::from_element(1, 2.0);
        let (ay, sy) = spec.assemble_observation(0.0, &x, spec.y0()).unwrap();
        assert_relative_eq!(ay[0], 0.1 + 2.0 - 0.5 * 0.04, epsilon = 1e-15);
        assert_relative_eq!(ay[1], 0.03 + 1.0 - 0.5 * 0.02, epsilon = 1e-15);
        assert_eq!(sy, dm(2, 3, &[0.0, 0.2, 0.0, 0.0, 0.1, 0.1]));
    }

    #[test]
    fn d_sigma_is_row_norms() {
        let spec = small_spec(&[3.0, 0.0, 0.0], &[0.0, 0.0, 1.0]);
        assert_eq!(spec.d_sigma(0.0, spec.y0()).unwrap()[0], 9.0);
        assert!(spec.d_sigma(0.0, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn linear_view_matches_model() {
        let spec = small_spec(&[0.0, 0.2, 0.0], &[0.0, 0.1, 0.1]);
        let lg = spec.to_linear_gaussian().unwrap();
        lg.check().unwrap();
        let x = DVector::from_element(1, -0.7);
        let (ay, _) = spec.assemble_observation(0.0, &x, spec.y0()).unwrap();
        assert_relative_eq!(ay, &lg.a0 + &lg.a * &x, epsilon = 1e-15);
    }

    #[test]
    fn rejects_wrong_coefficient_shape() {
        let dims = Dimensions::new(0, 1, 1, 1, 0).unwrap();
        let mut coef = Coefficients::<f64>::zeros(&dims);
        coef.sigma = CoefficientMap::constant(DMatrix::zeros(2, 3), 1, 2);
        let err = ModelSpec::new(
            dims,
            coef,
            HiddenLaw::Gaussian {
                mean: DVector::zeros(1),
                cov: DMatrix::identity(1, 1),
            },
            DVector::zeros(2),
            1.0,
        );
        assert!(matches!(err, Err(Error::Shape { .. })));
    }
}
