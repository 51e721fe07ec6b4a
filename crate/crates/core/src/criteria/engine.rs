//! Streaming path engine: one pass per path accumulates every pathwise
//! functional the estimators need, so no trajectory is stored.

use nalgebra::DVector;
use rayon::prelude::*;

use super::estimate::RiskSensitiveParams;
use super::integrands::{doleans_increment, g_from_parts, psi_increment};
use crate::error::{Error, Result};
use crate::filter::{FilterKind, FilterRunner};
use crate::model::ModelSpec;
use crate::rng::{normal, stream_rng};
use crate::sde::{JointStepper, MeasureTag, Strategy, TimeGrid};

/// Everything accumulated along one path.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PathLedger {
    pub diverged: bool,
    /// `R_T` in the full filtration.
    pub r_orig: f64,
    /// `R̃_T`, driven by the innovations.
    pub r_sep: f64,
    pub log_chi: f64,
    pub log_chi_hat: f64,
    /// `log χ̄^Z` (density of `P̄` against `P̂^h`).
    pub log_chi_bar: f64,
    pub log_psi: f64,
    pub int_g: f64,
    pub int_ghat: f64,
    pub k1x: f64,
    pub k1z: f64,
    pub k2x: f64,
    pub k2z: f64,
    /// Realized quadratic variation of each component of `U`.
    pub u_qv: Vec<f64>,
}

impl PathLedger {
    fn finite(&self) -> bool {
        [
            self.r_orig,
            self.r_sep,
            self.log_chi,
            self.log_chi_hat,
            self.log_chi_bar,
            self.log_psi,
            self.int_g,
            self.int_ghat,
            self.k1x,
            self.k1z,
            self.k2x,
            self.k2z,
        ]
        .iter()
        .chain(self.u_qv.iter())
        .all(|v| v.is_finite())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BatchConfig {
    pub params: RiskSensitiveParams<f64>,
    pub grid: TimeGrid<f64>,
    pub seed: u64,
    pub n_paths: usize,
    pub measure: MeasureTag,
}

#[derive(Clone, Debug)]
pub struct Batch {
    pub config: BatchConfig,
    pub filter_kind: FilterKind,
    pub ledgers: Vec<PathLedger>,
    /// Which components of `U` carry information.
    pub active: Vec<bool>,
}

impl Batch {
    pub fn n_diverged(&self) -> usize {
        self.ledgers.iter().filter(|l| l.diverged).count()
    }

    /// `f` over the non-diverged paths.
    pub fn collect(&self, f: impl Fn(&PathLedger) -> f64) -> Vec<f64> {
        self.ledgers.iter().filter(|l| !l.diverged).map(f).collect()
    }
}

/// Runs `n_paths` independent paths under `config.measure`. Path `i` always
/// uses stream `i` of `config.seed`; the result does not depend on the
/// number of worker threads.
pub fn run_batch(
    spec: &ModelSpec<f64>,
    strategy: &Strategy<f64>,
    kind: Option<FilterKind>,
    config: BatchConfig,
) -> Result<Batch> {
    config.params.check()?;
    let grid = config.grid;
    let runner = match kind {
        Some(k) => FilterRunner::new(spec, k, grid.dt, grid.steps)?,
        None => FilterRunner::auto(spec, grid.dt, grid.steps)?,
    };
    let dims = spec.dims();
    strategy.check(dims.m1, runner.summary_dim())?;
    let active = runner.gram(spec, grid.t0, spec.y0())?.active.clone();
    let ctx = Context {
        spec,
        strategy,
        runner: &runner,
        config,
    };
    let ledgers = (0..config.n_paths as u64)
        .into_par_iter()
        .map(|id| ctx.run_path(id))
        .collect();
    Ok(Batch {
        config,
        filter_kind: runner.kind(),
        ledgers,
        active,
    })
}

struct Context<'a> {
    spec: &'a ModelSpec<f64>,
    strategy: &'a Strategy<f64>,
    runner: &'a FilterRunner<'a, f64>,
    config: BatchConfig,
}

impl Context<'_> {
    fn run_path(&self, id: u64) -> PathLedger {
        let my = self.spec.dims().my();
        let mut led = PathLedger {
            r_orig: self.config.params.r0,
            r_sep: self.config.params.r0,
            u_qv: vec![0.0; my],
            ..PathLedger::default()
        };
        if self.walk(id, &mut led).is_err() || !led.finite() {
            led.diverged = true;
        }
        led
    }

    fn walk(&self, id: u64, led: &mut PathLedger) -> Result<()> {
        let spec = self.spec;
        let dims = spec.dims();
        let (my, d, m1) = (dims.my(), dims.d(), dims.m1);
        let tradable = dims.tradable();
        let bench = dims.benchmark();
        let theta = self.config.params.theta;
        let grid = self.config.grid;
        let dt = grid.dt;
        let sqrt_dt = dt.sqrt();
        let measure = self.config.measure;

        let mut rng = stream_rng(self.config.seed, id);
        let mut stepper = JointStepper::new(spec);
        let mut x = stepper.draw_initial(&mut rng);
        let mut y = spec.y0().clone();
        let mut state = self.runner.initial();

        let mut h = DVector::zeros(m1);
        let mut sigma1_h = DVector::zeros(d);
        let mut xi = DVector::zeros(d);
        let mut u = DVector::zeros(d);
        let mut s = DVector::zeros(d);
        let mut dw = DVector::zeros(d);
        let mut dw_tilde = DVector::zeros(d);
        let mut a1 = DVector::zeros(m1);
        let mut a1_hat = DVector::zeros(m1);
        let mut ahat = DVector::zeros(my);
        let mut acheck = DVector::zeros(my);
        let mut adag = DVector::zeros(my);
        let mut dy = DVector::zeros(my);
        let mut resid = DVector::zeros(my);
        let mut w = DVector::zeros(my);
        let mut du = DVector::zeros(my);
        let mut sy_dw = DVector::zeros(my);
        let mut scratch = DVector::zeros(my);

        for k in 0..grid.steps {
            let t = grid.time(k);
            stepper.eval(t, &x, &y);
            self.runner.hat_ay(t, &state, &y, &mut ahat)?;
            self.strategy.eval_into(t, state.summary(), &mut h);
            let sigma_y = &stepper.sigma_y;
            let sigma1 = sigma_y.rows(tradable.start, m1);
            sigma1_h.gemv_tr(1.0, &sigma1, &h, 0.0);
            for j in 0..d {
                xi[j] = sigma_y[(bench, j)];
            }
            u.copy_from(&sigma1_h);
            u -= &xi;
            s.copy_from(&u);
            s *= theta;

            let half_xi2 = 0.5 * xi.norm_squared();
            for i in 0..m1 {
                let d_sigma = sigma1.row(i).norm_squared();
                a1[i] = stepper.ay[tradable.start + i] + 0.5 * d_sigma;
                a1_hat[i] = ahat[tradable.start + i] + 0.5 * d_sigma;
            }
            let c = stepper.ay[bench] + half_xi2;
            let c_hat = ahat[bench] + half_xi2;
            let g = g_from_parts(theta, &h, &sigma1_h, &xi, &a1, c);
            let g_hat = g_from_parts(theta, &h, &sigma1_h, &xi, &a1_hat, c_hat);

            let gram = self.runner.gram(spec, t, &y)?;
            sy_dw.fill(0.0);
            for v in dw.iter_mut() {
                *v = normal::<f64>(&mut rng) * sqrt_dt;
            }
            acheck.copy_from(&ahat);
            acheck.gemv(-1.0, sigma_y, &s, 1.0);
            sy_dw.gemv(1.0, sigma_y, &dw, 0.0);
            match measure {
                MeasureTag::P | MeasureTag::Ph => {
                    adag.copy_from(&stepper.ay);
                    adag.gemv(-1.0, &stepper.sigma_y, &s, 1.0);
                    let shift = (measure == MeasureTag::Ph).then_some(&s);
                    stepper.advance(&mut x, &dw, dt, shift, &mut rng);
                    dy.copy_from(&stepper.dy);
                }
                MeasureTag::PhatH => {
                    dy.copy_from(&acheck);
                    dy *= dt;
                    dy += &sy_dw;
                }
                MeasureTag::Pbar => dy.copy_from(&sy_dw),
            }
            let sigma_y = &stepper.sigma_y;

            resid.copy_from(&dy);
            resid.axpy(-dt, &ahat, 1.0);
            w.gemv(1.0, &gram.inv, &resid, 0.0);
            dw_tilde.gemv_tr(1.0, sigma_y, &w, 0.0);
            du.gemv(1.0, &gram.inv_sqrt, &resid, 0.0);
            for (q, v) in led.u_qv.iter_mut().zip(du.iter()) {
                *q += v * v;
            }
            led.int_g += g * dt;
            led.int_ghat += g_hat * dt;

            match measure {
                MeasureTag::P => {
                    let drift = |a: &DVector<f64>, c: f64| -> f64 {
                        -0.5 * sigma1_h.norm_squared() + h.dot(a) + half_xi2 - c
                    };
                    led.r_orig += drift(&a1, c) * dt + u.dot(&dw);
                    led.r_sep += drift(&a1_hat, c_hat) * dt + u.dot(&dw_tilde);
                    led.log_chi += doleans_increment(theta, &u, &dw, dt);
                    led.log_chi_hat += doleans_increment(theta, &u, &dw_tilde, dt);
                    led.k1x += -0.5 * theta * u.dot(&dw);
                    led.k1z += -0.5 * theta * u.dot(&dw_tilde);
                }
                MeasureTag::Ph | MeasureTag::PhatH => {
                    if measure == MeasureTag::Ph {
                        w.gemv(1.0, &gram.inv, &adag, 0.0);
                        led.k2x += -0.5 * w.dot(&sy_dw);
                    }
                    // dY − ǎ dt
                    resid.copy_from(&dy);
                    resid.axpy(-dt, &acheck, 1.0);
                    w.gemv(1.0, &gram.inv, &acheck, 0.0);
                    let z = w.dot(&resid);
                    led.log_chi_bar += -z - 0.5 * w.dot(&acheck) * dt;
                    led.k2z += -0.5 * z;
                }
                MeasureTag::Pbar => {
                    resid.copy_from(&dy);
                    resid.axpy(-dt, &acheck, 1.0);
                    led.log_psi += psi_increment(&acheck, &gram.inv, &resid, dt);
                }
            }
            drop(gram);

            self.runner.step(k, t, &mut state, &y, &dy, dt, None, &mut scratch)?;
            y += &dy;
            if !x.x.iter().chain(y.iter()).all(|v| v.is_finite()) {
                return Err(Error::Numerical(format!("path {id} left the finite range at step {k}")));
            }
        }
        Ok(())
    }
}
