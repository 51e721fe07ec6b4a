//! Euler–Maruyama simulation of the hidden state and the observations, and
//! of the log excess return in both filtrations.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{Strategy, TimeGrid};
use crate::error::{Error, Result};
use crate::filter::{innovations_increment, FilterRunner, RunnerState};
use crate::linalg::{psd_floor, sym_sqrt};
use crate::model::{HiddenLaw, ModelSpec, StateSpace};
use crate::rng::{normal, stream_rng, uniform, PathRng};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum MeasureTag {
    P,
    Ph,
    PhatH,
    Pbar,
}

/// `θ (Σ^{(1)'} h − Ξ')`, the drift removed from `W` under `P^h`.
pub fn drift_shift_h<T: Real>(sigma1: &DMatrix<T>, xi: &DVector<T>, h: &DVector<T>, theta: T) -> Result<DVector<T>> {
    if sigma1.nrows() != h.len() {
        return Err(Error::shape("strategy vs Σ^(1)", sigma1.nrows(), h.len()));
    }
    if sigma1.ncols() != xi.len() {
        return Err(Error::shape("Ξ", sigma1.ncols(), xi.len()));
    }
    Ok((sigma1.transpose() * h - xi) * theta)
}

/// Hidden state: a point in `R^n`, plus the chain index for categorical laws.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenState<T: Real> {
    pub x: DVector<T>,
    pub chain: Option<usize>,
}

/// Draws `X0` from the initial law.
pub fn draw_initial<T: Real>(law: &HiddenLaw<T>, root: Option<&DMatrix<T>>, rng: &mut PathRng) -> HiddenState<T> {
    match law {
        HiddenLaw::Gaussian { mean, cov } => {
            let owned;
            let r = match root {
                Some(r) => r,
                None => {
                    owned = sym_sqrt(&psd_floor(cov));
                    &owned
                }
            };
            let z = DVector::from_fn(mean.len(), |_, _| normal::<T>(rng));
            HiddenState {
                x: mean + r * z,
                chain: None,
            }
        }
        HiddenLaw::Categorical { states, probs, .. } => {
            let u = uniform::<T>(rng);
            let mut cum = T::zero();
            let mut idx = states.len() - 1;
            for (i, p) in probs.iter().enumerate() {
                cum += *p;
                if u < cum {
                    idx = i;
                    break;
                }
            }
            HiddenState {
                x: states[idx].clone(),
                chain: Some(idx),
            }
        }
    }
}

/// One Euler step of `(X, Y)`, with optional drift shift `s`:
/// `dX = (b − Λs) dt + Λ dW`, `dY = (a^Y − Σ^Y s) dt + Σ^Y dW`.
/// Chain states jump with probability `q_ij dt` and ignore the shift.
pub struct JointStepper<'a, T: Real> {
    spec: &'a ModelSpec<T>,
    pub b: DVector<T>,
    pub lambda: DMatrix<T>,
    pub ay: DVector<T>,
    pub sigma_y: DMatrix<T>,
    pub dx: DVector<T>,
    pub dy: DVector<T>,
    init_root: Option<DMatrix<T>>,
}

impl<'a, T: Real> JointStepper<'a, T> {
    pub fn new(spec: &'a ModelSpec<T>) -> Self {
        let dims = spec.dims();
        let (n, my, d) = (dims.n, dims.my(), dims.d());
        let mut sigma_y = DMatrix::zeros(my, d);
        spec.obs_diffusion(T::zero(), spec.y0(), &mut sigma_y);
        let init_root = match spec.x0() {
            HiddenLaw::Gaussian { cov, .. } => Some(sym_sqrt(&psd_floor(cov))),
            HiddenLaw::Categorical { .. } => None,
        };
        Self {
            spec,
            b: DVector::zeros(n),
            lambda: DMatrix::zeros(n, d),
            ay: DVector::zeros(my),
            sigma_y,
            dx: DVector::zeros(n),
            dy: DVector::zeros(my),
            init_root,
        }
    }

    pub fn draw_initial(&self, rng: &mut PathRng) -> HiddenState<T> {
        draw_initial(self.spec.x0(), self.init_root.as_ref(), rng)
    }

    /// Evaluates the coefficients at `(t, X, Y)`; the buffers are then
    /// available to the caller (e.g. `ay` for integrands).
    pub fn eval(&mut self, t: T, x: &HiddenState<T>, y: &DVector<T>) {
        let spec = self.spec;
        spec.obs_drift(t, &x.x, y, &mut self.ay);
        if !spec.obs_diffusion_is_constant() {
            spec.obs_diffusion(t, y, &mut self.sigma_y);
        }
        if x.chain.is_none() {
            spec.state_drift(t, &x.x, y, &mut self.b);
            spec.state_diffusion(t, &x.x, y, &mut self.lambda);
        }
    }

    /// Computes `dY` (into `self.dy`) and advances `X` in place. Call
    /// [`Self::eval`] first.
    pub fn advance(
        &mut self,
        x: &mut HiddenState<T>,
        dw: &DVector<T>,
        dt: T,
        shift: Option<&DVector<T>>,
        rng: &mut PathRng,
    ) {
        self.dy.copy_from(&self.ay);
        if let Some(s) = shift {
            self.dy.gemv(-T::one(), &self.sigma_y, s, T::one());
        }
        self.dy.scale_mut(dt);
        self.dy.gemv(T::one(), &self.sigma_y, dw, T::one());
        match x.chain {
            None => {
                self.dx.copy_from(&self.b);
                if let Some(s) = shift {
                    self.dx.gemv(-T::one(), &self.lambda, s, T::one());
                }
                self.dx.scale_mut(dt);
                self.dx.gemv(T::one(), &self.lambda, dw, T::one());
                x.x += &self.dx;
            }
            Some(i) => {
                let HiddenLaw::Categorical { states, generator, .. } = self.spec.x0() else {
                    unreachable!("chain index without a categorical law");
                };
                let u = uniform::<T>(rng);
                let mut cum = T::zero();
                for j in 0..states.len() {
                    if j == i {
                        continue;
                    }
                    cum += generator[(i, j)] * dt;
                    if u < cum {
                        x.chain = Some(j);
                        x.x.copy_from(&states[j]);
                        break;
                    }
                }
            }
        }
    }
}

/// Fills `dw` with `N(0, dt I)` draws.
#[inline]
pub fn draw_increment<T: Real>(rng: &mut PathRng, sqrt_dt: T, dw: &mut DVector<T>) {
    for v in dw.iter_mut() {
        *v = normal::<T>(rng) * sqrt_dt;
    }
}

/// A stored trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct PathBundle<T: Real> {
    pub path_id: u64,
    pub grid: TimeGrid<T>,
    pub x: Vec<DVector<T>>,
    pub y: Vec<DVector<T>>,
    /// Log excess return, filled in by [`simulate_r_original`] when asked.
    pub r: Vec<T>,
    pub dw: Vec<DVector<T>>,
    pub seed: u64,
    pub measure: MeasureTag,
    pub diverged: bool,
}

/// Paths of `(X, Y)` under `P` (or under `P^h` for a constant shift `s`),
/// one random stream per path index.
pub fn simulate_joint<T: Real>(
    spec: &ModelSpec<T>,
    grid: &TimeGrid<T>,
    seed: u64,
    n_paths: usize,
    shift: Option<&DVector<T>>,
) -> Vec<PathBundle<T>> {
    use rayon::prelude::*;
    (0..n_paths as u64)
        .into_par_iter()
        .map(|id| simulate_one(spec, grid, seed, id, shift))
        .collect()
}

fn simulate_one<T: Real>(
    spec: &ModelSpec<T>,
    grid: &TimeGrid<T>,
    seed: u64,
    id: u64,
    shift: Option<&DVector<T>>,
) -> PathBundle<T> {
    let mut rng = stream_rng(seed, id);
    let mut stepper = JointStepper::new(spec);
    let mut x = stepper.draw_initial(&mut rng);
    let mut y = spec.y0().clone();
    let d = spec.dims().d();
    let sqrt_dt = grid.dt.sqrt();
    let mut bundle = PathBundle {
        path_id: id,
        grid: *grid,
        x: Vec::with_capacity(grid.steps + 1),
        y: Vec::with_capacity(grid.steps + 1),
        r: Vec::new(),
        dw: Vec::with_capacity(grid.steps),
        seed,
        measure: if shift.is_some() { MeasureTag::Ph } else { MeasureTag::P },
        diverged: false,
    };
    bundle.x.push(x.x.clone());
    bundle.y.push(y.clone());
    let mut dw = DVector::zeros(d);
    for k in 0..grid.steps {
        let t = grid.time(k);
        draw_increment(&mut rng, sqrt_dt, &mut dw);
        stepper.eval(t, &x, &y);
        stepper.advance(&mut x, &dw, grid.dt, shift, &mut rng);
        y += &stepper.dy;
        bundle.dw.push(dw.clone());
        bundle.x.push(x.x.clone());
        bundle.y.push(y.clone());
        if !bundle.diverged && x.x.iter().chain(y.iter()).any(|v| !v.is_finite_value()) {
            bundle.diverged = true;
        }
    }
    bundle
}

/// Filter output along one stored path.
#[derive(Clone, Debug)]
pub struct FilterTrajectory<T: Real> {
    pub grid: TimeGrid<T>,
    pub states: Vec<RunnerState<T>>,
    /// `â^Y` at `t_k`, `k = 0..steps`.
    pub hat_ay: Vec<DVector<T>>,
}

pub fn run_filter<T: Real>(
    spec: &ModelSpec<T>,
    runner: &FilterRunner<'_, T>,
    bundle: &PathBundle<T>,
) -> Result<FilterTrajectory<T>> {
    let grid = bundle.grid;
    let mut state = runner.initial();
    let my = spec.dims().my();
    let mut scratch = DVector::zeros(my);
    let mut out = FilterTrajectory {
        grid,
        states: Vec::with_capacity(grid.steps + 1),
        hat_ay: Vec::with_capacity(grid.steps),
    };
    out.states.push(state.clone());
    for k in 0..grid.steps {
        let t = grid.time(k);
        let y = &bundle.y[k];
        let dy = &bundle.y[k + 1] - y;
        let mut ahat = DVector::zeros(my);
        runner.hat_ay(t, &state, y, &mut ahat)?;
        out.hat_ay.push(ahat);
        runner.step(k, t, &mut state, y, &dy, grid.dt, None, &mut scratch)?;
        out.states.push(state.clone());
    }
    Ok(out)
}

/// Strategy value at step `k`; feedback strategies need the filter.
fn strategy_at<T: Real>(
    strategy: &Strategy<T>,
    t: T,
    k: usize,
    filter: Option<&FilterTrajectory<T>>,
) -> Result<DVector<T>> {
    match (strategy, filter) {
        (Strategy::Constant(h), _) => Ok(h.clone()),
        (_, Some(f)) => Ok(strategy.eval(t, f.states[k].summary())),
        (_, None) => Err(Error::Validation("a feedback strategy needs the filter trajectory".into())),
    }
}

/// `R` in the full filtration:
/// `dR = (−½|Σ^{(1)'}h|² + h'a^{(1)} + ½|Ξ|² − c) dt + (h'Σ^{(1)} − Ξ) dW`.
pub fn simulate_r_original<T: Real>(
    spec: &ModelSpec<T>,
    strategy: &Strategy<T>,
    r0: T,
    bundle: &PathBundle<T>,
    filter: Option<&FilterTrajectory<T>>,
) -> Result<Vec<T>> {
    let grid = bundle.grid;
    let mut r = Vec::with_capacity(grid.steps + 1);
    r.push(r0);
    let mut cur = r0;
    for k in 0..grid.steps {
        let t = grid.time(k);
        let (x, y) = (&bundle.x[k], &bundle.y[k]);
        let h = strategy_at(strategy, t, k, filter)?;
        let sigma1 = spec.sigma1(t, y);
        let xi = spec.xi_vector(t, y);
        let u = sigma1.transpose() * &h - &xi;
        let drift = return_drift(&h, &sigma1, &xi, &spec.a1(t, x, y), spec.benchmark_drift(t, x, y));
        cur += drift * grid.dt + u.dot(&bundle.dw[k]);
        r.push(cur);
    }
    Ok(r)
}

/// `R̃` in the observation filtration: hat coefficients and innovations
/// increments in place of `a^{(1)}, c` and `dW`.
pub fn simulate_r_separated<T: Real>(
    spec: &ModelSpec<T>,
    strategy: &Strategy<T>,
    r0: T,
    filter: &FilterTrajectory<T>,
    bundle: &PathBundle<T>,
) -> Result<Vec<T>> {
    if !filter.grid.same_as(&bundle.grid) || filter.hat_ay.len() != bundle.dw.len() {
        return Err(Error::Alignment(format!(
            "filter has {} steps of {:.3e}, observations {} steps of {:.3e}",
            filter.hat_ay.len(),
            filter.grid.dt.as_f64(),
            bundle.dw.len(),
            bundle.grid.dt.as_f64()
        )));
    }
    let grid = bundle.grid;
    let dims = spec.dims();
    let mut r = Vec::with_capacity(grid.steps + 1);
    r.push(r0);
    let mut cur = r0;
    let my = dims.my();
    let mut sigma_y = DMatrix::zeros(my, dims.d());
    for k in 0..grid.steps {
        let t = grid.time(k);
        let y = &bundle.y[k];
        let dy = &bundle.y[k + 1] - y;
        let h = strategy_at(strategy, t, k, Some(filter))?;
        let sigma1 = spec.sigma1(t, y);
        let xi = spec.xi_vector(t, y);
        let u = sigma1.transpose() * &h - &xi;
        let (a1_hat, c_hat) = hat_return_coefficients(spec, t, y, &filter.hat_ay[k])?;
        spec.obs_diffusion(t, y, &mut sigma_y);
        let gram = spec.obs_gram(t, y)?;
        let inn = innovations_increment(&sigma_y, &gram, &dy, &filter.hat_ay[k], grid.dt)?;
        cur += return_drift(&h, &sigma1, &xi, &a1_hat, c_hat) * grid.dt + u.dot(&inn.dw_tilde);
        r.push(cur);
    }
    Ok(r)
}

/// `−½|Σ^{(1)'}h|² + h'a^{(1)} + ½|Ξ|² − c`.
pub fn return_drift<T: Real>(h: &DVector<T>, sigma1: &DMatrix<T>, xi: &DVector<T>, a1: &DVector<T>, c: T) -> T {
    let half = T::lit(0.5);
    -half * (sigma1.transpose() * h).norm_squared() + h.dot(a1) + half * xi.norm_squared() - c
}

/// Recovers `(â^{(1)}, ĉ)` from `â^Y` by undoing the Itô corrections.
pub fn hat_return_coefficients<T: Real>(
    spec: &ModelSpec<T>,
    t: T,
    y: &DVector<T>,
    hat_ay: &DVector<T>,
) -> Result<(DVector<T>, T)> {
    let dims = spec.dims();
    let d_sigma = spec.d_sigma(t, y)?;
    let half = T::lit(0.5);
    let a1 = DVector::from_fn(dims.m1, |i, _| hat_ay[dims.ell + i] + half * d_sigma[i]);
    let c = hat_ay[dims.benchmark()] + half * spec.xi_vector(t, y).norm_squared();
    Ok((a1, c))
}

/// Wealth and benchmark levels by Euler on
/// `dV = V h'(a^{(1)} dt + Σ^{(1)} dW)` and `dL = L (c dt + Ξ dW)`.
pub fn simulate_wealth_benchmark<T: Real>(
    spec: &ModelSpec<T>,
    h: &DVector<T>,
    v0: T,
    l0: T,
    bundle: &PathBundle<T>,
) -> (Vec<T>, Vec<T>) {
    let grid = bundle.grid;
    let mut v = vec![v0];
    let mut l = vec![l0];
    for k in 0..grid.steps {
        let t = grid.time(k);
        let (x, y) = (&bundle.x[k], &bundle.y[k]);
        let sigma1 = spec.sigma1(t, y);
        let xi = spec.xi_vector(t, y);
        let dw = &bundle.dw[k];
        let dv = h.dot(&spec.a1(t, x, y)) * grid.dt + (sigma1.transpose() * h).dot(dw);
        let dl = spec.benchmark_drift(t, x, y) * grid.dt + xi.dot(dw);
        let (vk, lk) = (v[k], l[k]);
        v.push(vk + vk * dv);
        l.push(lk + lk * dl);
    }
    (v, l)
}
