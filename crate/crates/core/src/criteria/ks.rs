//! Cluster check of the generalized Kallianpur–Striebel formula.
//!
//! Each cluster fixes one observation path drawn under `P^h`. The left side
//! `E^h[φ(X_T) e^{θ∫g} | F^Y]` is computed by forward-filtering
//! backward-sampling on the Euler-discretized linear-Gaussian model; the
//! right side is the ratio of `P̄` expectations, with hidden paths simulated
//! given the fixed observations and weighted by `Ψ^X`. The two estimators
//! share nothing but the observation path.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::estimate::RiskSensitiveParams;
use super::estimators::Status;
use super::integrands::g_from_parts;
use crate::error::{Error, Result};
use crate::filter::FilterRunner;
use crate::linalg::{psd_floor, sym_sqrt, symmetrize, ObsGram};
use crate::model::{LinearGaussianModel, ModelSpec, StateSpace};
use crate::rng::{derive_seed, normal, stream_rng};
use crate::sde::{JointStepper, Strategy, TimeGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    One,
    /// `φ(x) = x_i`.
    Coordinate(usize),
}

impl TestFunction {
    fn eval(self, x: &DVector<f64>) -> f64 {
        match self {
            TestFunction::One => 1.0,
            TestFunction::Coordinate(i) => x[i],
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct KsConfig {
    pub phi: TestFunction,
    /// Drop the `e^{θ∫g}` factor (the `g ≡ 0` case).
    pub with_g: bool,
    pub n_clusters: usize,
    /// Hidden paths per cluster and per side.
    pub paths_per_cluster: usize,
    /// Clusters whose `Ψ^X` weights have a smaller effective sample size are
    /// skipped.
    pub min_ess: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClusterResult {
    pub cluster: usize,
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub rhs: f64,
    pub rhs_stderr: f64,
    pub z: f64,
    pub ess: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct KsReport {
    pub clusters: Vec<ClusterResult>,
    pub n_skipped: usize,
    pub fraction_within_3: f64,
    pub pooled_gap: f64,
    pub pooled_stderr: f64,
    pub max_relative_discrepancy: f64,
    pub status: Status,
}

/// One observation path with the strategy-dependent shift along it.
struct Cluster {
    y: Vec<DVector<f64>>,
    dy: Vec<DVector<f64>>,
    h: Vec<DVector<f64>>,
    s: Vec<DVector<f64>>,
}

pub fn kallianpur_striebel_check(
    spec: &ModelSpec<f64>,
    strategy: &Strategy<f64>,
    params: &RiskSensitiveParams<f64>,
    grid: &TimeGrid<f64>,
    seed: u64,
    cfg: &KsConfig,
) -> Result<KsReport> {
    params.check()?;
    let model = spec.to_linear_gaussian().ok_or_else(|| {
        Error::Unsupported("the Kallianpur-Striebel check needs a linear-Gaussian model".into())
    })?;
    let cross = &model.lambda * model.sigma_y.transpose();
    if cross.amax() > 1e-14 {
        return Err(Error::Unsupported(
            "the Kallianpur-Striebel check needs signal noise independent of observation noise".into(),
        ));
    }
    let runner = FilterRunner::auto(spec, grid.dt, grid.steps)?;
    strategy.check(spec.dims().m1, runner.summary_dim())?;
    let gram = ObsGram::new(&model.sigma_y)?;
    let results: Vec<Result<Option<ClusterResult>>> = (0..cfg.n_clusters)
        .into_par_iter()
        .map(|j| {
            let cluster = draw_cluster(spec, strategy, &runner, params.theta, grid, seed, j as u64)?;
            let (lhs, lhs_se) = lhs_ffbs(spec, &model, &gram, grid, params.theta, &cluster, cfg, seed, j as u64)?;
            let (rhs, rhs_se, ess) = rhs_weighted(spec, &model, &gram, grid, params.theta, &cluster, cfg, seed, j as u64)?;
            if ess < cfg.min_ess {
                return Ok(None);
            }
            let se = lhs_se.hypot(rhs_se);
            Ok(Some(ClusterResult {
                cluster: j,
                lhs,
                lhs_stderr: lhs_se,
                rhs,
                rhs_stderr: rhs_se,
                z: if se > 0.0 { (lhs - rhs) / se } else { 0.0 },
                ess,
            }))
        })
        .collect();
    let mut clusters = Vec::new();
    let mut n_skipped = 0;
    for r in results {
        match r? {
            Some(c) => clusters.push(c),
            None => n_skipped += 1,
        }
    }
    if clusters.is_empty() {
        return Err(Error::Estimation(format!("all {n_skipped} clusters were skipped")));
    }
    let nc = clusters.len() as f64;
    let within = clusters.iter().filter(|c| c.z.abs() <= 3.0).count() as f64 / nc;
    let pooled_gap = clusters.iter().map(|c| c.lhs - c.rhs).sum::<f64>() / nc;
    let pooled_stderr = clusters
        .iter()
        .map(|c| c.lhs_stderr.powi(2) + c.rhs_stderr.powi(2))
        .sum::<f64>()
        .sqrt()
        / nc;
    let max_relative_discrepancy = clusters
        .iter()
        .map(|c| (c.lhs - c.rhs).abs() / c.lhs.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    let ok = within >= 0.95 && pooled_gap.abs() <= 3.0 * pooled_stderr + 1e-12;
    Ok(KsReport {
        clusters,
        n_skipped,
        fraction_within_3: within,
        pooled_gap,
        pooled_stderr,
        max_relative_discrepancy,
        status: Status::from_bool(ok),
    })
}

/// Shift `s = θ(Σ^{(1)'}h − Ξ')` and `g` at one point.
fn shift_and_g(spec: &ModelSpec<f64>, theta: f64, t: f64, x: &DVector<f64>, y: &DVector<f64>, h: &DVector<f64>) -> (DVector<f64>, f64) {
    let sigma1 = spec.sigma1(t, y);
    let xi = spec.xi_vector(t, y);
    let sh = sigma1.transpose() * h;
    let a1 = spec.a1(t, x, y);
    let g = g_from_parts(theta, h, &sh, &xi, &a1, spec.benchmark_drift(t, x, y));
    ((sh - xi) * theta, g)
}

fn draw_cluster(
    spec: &ModelSpec<f64>,
    strategy: &Strategy<f64>,
    runner: &FilterRunner<'_, f64>,
    theta: f64,
    grid: &TimeGrid<f64>,
    seed: u64,
    j: u64,
) -> Result<Cluster> {
    let mut rng = stream_rng(derive_seed(seed, 1), j);
    let mut stepper = JointStepper::new(spec);
    let mut x = stepper.draw_initial(&mut rng);
    let mut y = spec.y0().clone();
    let mut state = runner.initial();
    let d = spec.dims().d();
    let mut dw = DVector::zeros(d);
    let mut scratch = DVector::zeros(spec.dims().my());
    let mut out = Cluster {
        y: Vec::with_capacity(grid.steps),
        dy: Vec::with_capacity(grid.steps),
        h: Vec::with_capacity(grid.steps),
        s: Vec::with_capacity(grid.steps),
    };
    for k in 0..grid.steps {
        let t = grid.time(k);
        let h = strategy.eval(t, state.summary());
        let (s, _) = shift_and_g(spec, theta, t, &x.x, &y, &h);
        for v in dw.iter_mut() {
            *v = normal::<f64>(&mut rng) * grid.dt.sqrt();
        }
        stepper.eval(t, &x, &y);
        stepper.advance(&mut x, &dw, grid.dt, Some(&s), &mut rng);
        let dy = stepper.dy.clone();
        runner.step(k, t, &mut state, &y, &dy, grid.dt, None, &mut scratch)?;
        out.y.push(y.clone());
        out.dy.push(dy.clone());
        out.h.push(h);
        out.s.push(s);
        y += &dy;
    }
    Ok(out)
}

/// Forward filter and backward sampling on
/// `X_{k+1} = F X_k + (b0 − Λs_k)dt + Λ ΔW_k`, `ΔY_k = (a0 + A X_k − Σ^Y s_k)dt + Σ^Y ΔW_k`.
#[allow(clippy::too_many_arguments)]
fn lhs_ffbs(
    spec: &ModelSpec<f64>,
    model: &LinearGaussianModel<f64>,
    gram: &ObsGram<f64>,
    grid: &TimeGrid<f64>,
    theta: f64,
    cl: &Cluster,
    cfg: &KsConfig,
    seed: u64,
    j: u64,
) -> Result<(f64, f64)> {
    let n = model.m0.len();
    let dt = grid.dt;
    let steps = grid.steps;
    let idx: Vec<usize> = (0..gram.active.len()).filter(|&i| gram.active[i]).collect();
    let h_act = DMatrix::from_fn(idx.len(), n, |r, c| model.a[(idx[r], c)] * dt);
    let r_act = DMatrix::from_fn(idx.len(), idx.len(), |r, c| gram.gram[(idx[r], idx[c])] * dt);
    let f = DMatrix::identity(n, n) + &model.b * dt;
    let q = &model.lambda * model.lambda.transpose() * dt;

    let mut filt_m = Vec::with_capacity(steps);
    let mut filt_p = Vec::with_capacity(steps);
    let mut pred_m = Vec::with_capacity(steps + 1);
    let mut pred_p = Vec::with_capacity(steps + 1);
    pred_m.push(model.m0.clone());
    pred_p.push(model.p0.clone());
    for k in 0..steps {
        let (m, p) = (&pred_m[k], &pred_p[k]);
        let obs_offset = (&model.a0 - &model.sigma_y * &cl.s[k]) * dt;
        let z = DVector::from_fn(idx.len(), |r, _| cl.dy[k][idx[r]] - obs_offset[idx[r]]);
        let innov = &z - &h_act * m;
        let s_mat = &h_act * p * h_act.transpose() + &r_act;
        let s_inv = s_mat
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular innovation covariance".into()))?;
        let gain = p * h_act.transpose() * s_inv;
        let mf = m + &gain * innov;
        let pf = psd_floor(&symmetrize(&(p - &gain * &h_act * p)));
        let offset = (&model.b0 - &model.lambda * &cl.s[k]) * dt;
        pred_m.push(&f * &mf + offset);
        pred_p.push(symmetrize(&(&f * &pf * f.transpose() + &q)));
        filt_m.push(mf);
        filt_p.push(pf);
    }
    // Backward kernels X_k | X_{k+1}.
    let mut gains = Vec::with_capacity(steps);
    let mut roots = Vec::with_capacity(steps);
    for k in 0..steps {
        let inv = pred_p[k + 1]
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular predicted covariance in the smoother".into()))?;
        let gk = &filt_p[k] * f.transpose() * inv;
        let cov = psd_floor(&symmetrize(&(&filt_p[k] - &gk * &f * &filt_p[k])));
        roots.push(sym_sqrt(&cov));
        gains.push(gk);
    }
    let root_n = sym_sqrt(&psd_floor(&pred_p[steps]));

    let mut rng = stream_rng(derive_seed(seed, 2), j);
    let mut vals = Vec::with_capacity(cfg.paths_per_cluster);
    let mut xs = vec![DVector::zeros(n); steps + 1];
    let draw = |rng: &mut _| DVector::from_fn(n, |_, _| normal::<f64>(rng));
    for _ in 0..cfg.paths_per_cluster {
        xs[steps] = &pred_m[steps] + &root_n * draw(&mut rng);
        for k in (0..steps).rev() {
            let mean = &filt_m[k] + &gains[k] * (&xs[k + 1] - &pred_m[k + 1]);
            xs[k] = mean + &roots[k] * draw(&mut rng);
        }
        let mut int_g = 0.0;
        if cfg.with_g {
            for k in 0..steps {
                let (_, g) = shift_and_g(spec, theta, grid.time(k), &xs[k], &cl.y[k], &cl.h[k]);
                int_g += g * dt;
            }
        }
        vals.push(cfg.phi.eval(&xs[steps]) * (theta * int_g).exp());
    }
    let nf = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / nf;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0).max(1.0);
    Ok((mean, (var / nf).sqrt()))
}

/// `Σ φ e^{θ∫g} Ψ^X / Σ Ψ^X` over hidden paths simulated under `P̄` given
/// the observations; returns the ratio, its delta-method stderr and the
/// effective sample size of the weights.
#[allow(clippy::too_many_arguments)]
fn rhs_weighted(
    spec: &ModelSpec<f64>,
    model: &LinearGaussianModel<f64>,
    gram: &ObsGram<f64>,
    grid: &TimeGrid<f64>,
    theta: f64,
    cl: &Cluster,
    cfg: &KsConfig,
    seed: u64,
    j: u64,
) -> Result<(f64, f64, f64)> {
    let dims = spec.dims();
    let (n, d, my) = (dims.n, dims.d(), dims.my());
    let dt = grid.dt;
    let sigma_y = &model.sigma_y;
    // Λ dW̄ given Σ^Y dW̄ = dY: mean Λ Σ^Y' S⁻¹ dY, noise Λ (I − Σ^Y' S⁻¹ Σ^Y) ξ.
    let proj = DMatrix::identity(d, d) - sigma_y.transpose() * &gram.inv * sigma_y;
    let lam_proj = &model.lambda * proj;
    let lam_cond = &model.lambda * sigma_y.transpose() * &gram.inv;
    let root0 = sym_sqrt(&psd_floor(&model.p0));
    let mut rng = stream_rng(derive_seed(seed, 3), j);

    let mut log_num = Vec::with_capacity(cfg.paths_per_cluster);
    let mut phis = Vec::with_capacity(cfg.paths_per_cluster);
    let mut log_den = Vec::with_capacity(cfg.paths_per_cluster);
    let mut b = DVector::zeros(n);
    let mut ay = DVector::zeros(my);
    let mut xi = DVector::zeros(d);
    for _ in 0..cfg.paths_per_cluster {
        let mut x = &model.m0 + &root0 * DVector::from_fn(n, |_, _| normal::<f64>(&mut rng));
        let (mut log_psi, mut int_g) = (0.0, 0.0);
        for k in 0..grid.steps {
            let t = grid.time(k);
            let (y, dy, s) = (&cl.y[k], &cl.dy[k], &cl.s[k]);
            model.state_drift(t, &x, y, &mut b);
            model.obs_drift(t, &x, y, &mut ay);
            let adag = &ay - sigma_y * s;
            let w = &gram.inv * &adag;
            log_psi += w.dot(dy) - 0.5 * w.dot(&adag) * dt;
            if cfg.with_g {
                let (_, g) = shift_and_g(spec, theta, t, &x, y, &cl.h[k]);
                int_g += g * dt;
            }
            for v in xi.iter_mut() {
                *v = normal::<f64>(&mut rng) * dt.sqrt();
            }
            let drift = &b - &model.lambda * s - &lam_cond * &adag;
            x += drift * dt + &lam_cond * dy + &lam_proj * &xi;
        }
        phis.push(cfg.phi.eval(&x));
        log_num.push(log_psi + theta * int_g);
        log_den.push(log_psi);
    }
    let max_den = log_den.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let max_num = log_num.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max_den.is_finite() || !max_num.is_finite() {
        return Err(Error::DegenerateLikelihood);
    }
    let den: Vec<f64> = log_den.iter().map(|l| (l - max_den).exp()).collect();
    let num: Vec<f64> = log_num.iter().zip(&phis).map(|(l, p)| p * (l - max_num).exp()).collect();
    let scale = (max_num - max_den).exp();
    let sd: f64 = den.iter().sum();
    let ratio = scale * num.iter().sum::<f64>() / sd;
    let se = (num
        .iter()
        .zip(&den)
        .map(|(a, b)| (scale * a - ratio * b).powi(2))
        .sum::<f64>())
    .sqrt()
        / sd;
    let ess = sd * sd / den.iter().map(|w| w * w).sum::<f64>();
    Ok((ratio, se, ess))
}
