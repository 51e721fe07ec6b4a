//! Finite-volume solver for `∂q/∂t = L̂*q + θĝ q` on one- or two-dimensional
//! grids: upwind advection, central diffusion, zero-flux walls, and Strang
//! splitting with the source applied exactly.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::dynamics::ZetaGenerator;
use crate::error::{Error, Result};
use crate::linalg::{psd_floor, sym_sqrt};
use crate::rng::{normal, stream_rng};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n_cells: usize,
}

impl Axis {
    pub fn delta(&self) -> f64 {
        (self.hi - self.lo) / self.n_cells as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.delta()
    }

    pub fn face(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.delta()
    }
}

/// Cell-centred density; in two dimensions the last axis varies fastest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityGrid {
    pub axes: Vec<Axis>,
    pub values: Vec<f64>,
    pub t: f64,
    pub mass: f64,
}

impl DensityGrid {
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(Axis::delta).product()
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_volume()
    }

    fn refresh_mass(&mut self) {
        self.mass = self.integral();
    }

    /// Cell centre of flat index `idx`.
    pub fn center(&self, idx: usize) -> Vec<f64> {
        match self.axes.len() {
            1 => vec![self.axes[0].center(idx)],
            _ => {
                let n1 = self.axes[1].n_cells;
                vec![self.axes[0].center(idx / n1), self.axes[1].center(idx % n1)]
            }
        }
    }

    /// Mass within `band` cells of any wall.
    pub fn boundary_mass(&self, band: usize) -> f64 {
        let vol = self.cell_volume();
        let near = |i: usize, n: usize| i < band || i + band >= n;
        match self.axes.len() {
            1 => (0..self.values.len())
                .filter(|&i| near(i, self.axes[0].n_cells))
                .map(|i| self.values[i].abs() * vol)
                .sum(),
            _ => {
                let (n0, n1) = (self.axes[0].n_cells, self.axes[1].n_cells);
                (0..self.values.len())
                    .filter(|&i| near(i / n1, n0) || near(i % n1, n1))
                    .map(|i| self.values[i].abs() * vol)
                    .sum()
            }
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        let total: f64 = self.values.iter().sum();
        let mut out = vec![0.0; self.axes.len()];
        for (idx, v) in self.values.iter().enumerate() {
            for (o, c) in out.iter_mut().zip(self.center(idx)) {
                *o += v * c / total;
            }
        }
        out
    }

    pub fn variance(&self, axis: usize) -> f64 {
        let total: f64 = self.values.iter().sum();
        let mu = self.mean()[axis];
        self.values
            .iter()
            .enumerate()
            .map(|(idx, v)| v * (self.center(idx)[axis] - mu).powi(2) / total)
            .sum()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeScheme {
    /// Forward Euler with a positivity (CFL) guard.
    #[default]
    Explicit,
    /// One-dimensional grids only.
    CrankNicolson,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Cells per axis.
    pub cells: usize,
    pub dt: f64,
    pub scheme: TimeScheme,
    /// Half-width of the domain in standard deviations of the simulated
    /// `ζ_T` cloud.
    pub sd_width: f64,
    /// Standard deviation of the initial bump, in cells.
    pub init_width_cells: f64,
    pub cloud_paths: usize,
    pub seed: u64,
    /// Number of interior snapshots kept besides the final state.
    pub snapshots: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            cells: 400,
            dt: 1.0 / 1024.0,
            scheme: TimeScheme::Explicit,
            sd_width: 8.0,
            init_width_cells: 2.0,
            cloud_paths: 2000,
            seed: 0x6d7a65,
            snapshots: 4,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DensitySolution {
    pub final_grid: DensityGrid,
    pub snapshots: Vec<DensityGrid>,
    pub steps: usize,
}

/// Domain from the generator's bounds, or `ζ0 ± sd_width·sd` of an Euler
/// cloud of `ζ_T`.
pub fn choose_domain(gen: &dyn ZetaGenerator, horizon: f64, cfg: &GridConfig) -> Vec<Axis> {
    if let Some(b) = gen.bounds() {
        return b
            .into_iter()
            .map(|(lo, hi)| Axis {
                lo,
                hi,
                n_cells: cfg.cells,
            })
            .collect();
    }
    let q = gen.dim();
    let z0 = gen.zeta0();
    let steps = ((horizon / cfg.dt).round() as usize).max(1);
    let dt = horizon / steps as f64;
    let mut sum = vec![0.0; q];
    let mut sum2 = vec![0.0; q];
    let mut drift = vec![0.0; q];
    let mut diff = vec![0.0; q * q];
    let n_paths = cfg.cloud_paths.max(2);
    for p in 0..n_paths {
        let mut rng = stream_rng(cfg.seed, p as u64);
        let mut z = z0.clone();
        for k in 0..steps {
            gen.eval(k as f64 * dt, &z, &mut drift, &mut diff);
            let root = sym_sqrt(&psd_floor(&DMatrix::from_row_slice(q, q, &diff)));
            let xi = DVector::from_fn(q, |_, _| normal::<f64>(&mut rng) * dt.sqrt());
            let dz = root * xi;
            for i in 0..q {
                z[i] += drift[i] * dt + dz[i];
            }
        }
        for i in 0..q {
            sum[i] += z[i];
            sum2[i] += z[i] * z[i];
        }
    }
    (0..q)
        .map(|i| {
            let mean = sum[i] / n_paths as f64;
            let sd = (sum2[i] / n_paths as f64 - mean * mean).max(0.0).sqrt();
            let sd = if sd > 0.0 { sd } else { 0.125 * (1.0 + z0[i].abs()) };
            Axis {
                lo: z0[i].min(mean) - cfg.sd_width * sd,
                hi: z0[i].max(mean) + cfg.sd_width * sd,
                n_cells: cfg.cells,
            }
        })
        .collect()
}

/// Gaussian bump of width `init_width_cells` cells at `ζ0`, unit mass.
pub fn initial_density(axes: &[Axis], zeta0: &[f64], width_cells: f64) -> Result<DensityGrid> {
    let size: usize = axes.iter().map(|a| a.n_cells).product();
    let mut g = DensityGrid {
        axes: axes.to_vec(),
        values: vec![0.0; size],
        t: 0.0,
        mass: 0.0,
    };
    for idx in 0..size {
        let c = g.center(idx);
        let e: f64 = c
            .iter()
            .zip(axes)
            .zip(zeta0)
            .map(|((x, a), z)| {
                let w = width_cells * a.delta();
                ((x - z) / w).powi(2)
            })
            .sum();
        g.values[idx] = (-0.5 * e).exp();
    }
    let m = g.integral();
    if !(m > 0.0) {
        return Err(Error::Validation("the initial point lies outside the density grid".into()));
    }
    for v in g.values.iter_mut() {
        *v /= m;
    }
    g.refresh_mass();
    Ok(g)
}

/// Coefficients sampled at one time: cell drifts, face drifts, cell
/// diffusion matrices and cell sources.
struct Sampled {
    /// `face_drift[a][f]`: drift component `a` at the faces normal to axis `a`.
    face_drift: Vec<Vec<f64>>,
    /// Row-major `q×q` diffusion matrix per cell.
    cell_diff: Vec<f64>,
}

fn sample(gen: &dyn ZetaGenerator, g: &DensityGrid, t: f64) -> Sampled {
    let q = g.axes.len();
    let size = g.values.len();
    let mut drift = vec![0.0; q];
    let mut diff = vec![0.0; q * q];
    let mut cell_diff = vec![0.0; size * q * q];
    for idx in 0..size {
        gen.eval(t, &g.center(idx), &mut drift, &mut diff);
        cell_diff[idx * q * q..(idx + 1) * q * q].copy_from_slice(&diff);
    }
    let mut face_drift = Vec::with_capacity(q);
    match q {
        1 => {
            let a = g.axes[0];
            let f: Vec<f64> = (0..=a.n_cells)
                .map(|i| {
                    gen.eval(t, &[a.face(i)], &mut drift, &mut diff);
                    drift[0]
                })
                .collect();
            face_drift.push(f);
        }
        _ => {
            let (a0, a1) = (g.axes[0], g.axes[1]);
            // Faces normal to axis 0: (n0+1) × n1; normal to axis 1: n0 × (n1+1).
            let mut f0 = Vec::with_capacity((a0.n_cells + 1) * a1.n_cells);
            for i in 0..=a0.n_cells {
                for j in 0..a1.n_cells {
                    gen.eval(t, &[a0.face(i), a1.center(j)], &mut drift, &mut diff);
                    f0.push(drift[0]);
                }
            }
            let mut f1 = Vec::with_capacity(a0.n_cells * (a1.n_cells + 1));
            for i in 0..a0.n_cells {
                for j in 0..=a1.n_cells {
                    gen.eval(t, &[a0.center(i), a1.face(j)], &mut drift, &mut diff);
                    f1.push(drift[1]);
                }
            }
            face_drift.push(f0);
            face_drift.push(f1);
        }
    }
    Sampled { face_drift, cell_diff }
}

/// Tridiagonal `L` of the one-dimensional flux step: `(lower, diag, upper)`.
fn tridiagonal(g: &DensityGrid, s: &Sampled) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = g.axes[0].n_cells;
    let dz = g.axes[0].delta();
    let (mut lo, mut di, mut up) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for i in 0..n.saturating_sub(1) {
        // Flux through the face between i and i+1: α q_i + β q_{i+1}.
        let mu = s.face_drift[0][i + 1];
        let alpha = mu.max(0.0) + 0.5 * s.cell_diff[i] / dz;
        let beta = mu.min(0.0) - 0.5 * s.cell_diff[i + 1] / dz;
        di[i] -= alpha / dz;
        up[i] -= beta / dz;
        lo[i + 1] += alpha / dz;
        di[i + 1] += beta / dz;
    }
    (lo, di, up)
}

fn apply_tridiagonal(lo: &[f64], di: &[f64], up: &[f64], q: &[f64], out: &mut [f64]) {
    let n = q.len();
    for i in 0..n {
        let mut v = di[i] * q[i];
        if i > 0 {
            v += lo[i] * q[i - 1];
        }
        if i + 1 < n {
            v += up[i] * q[i + 1];
        }
        out[i] = v;
    }
}

/// Thomas algorithm for `(lo, di, up) x = rhs`.
fn solve_tridiagonal(lo: &[f64], di: &[f64], up: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = rhs.len();
    let mut c = vec![0.0; n];
    let mut b = di[0];
    if b == 0.0 {
        return Err(Error::Numerical("singular tridiagonal system".into()));
    }
    rhs[0] /= b;
    for i in 1..n {
        c[i - 1] = up[i - 1] / b;
        b = di[i] - lo[i] * c[i - 1];
        if b == 0.0 {
            return Err(Error::Numerical("singular tridiagonal system".into()));
        }
        rhs[i] = (rhs[i] - lo[i] * rhs[i - 1]) / b;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Ok(())
}

/// `L q` for the two-dimensional flux step, with the explicit stability
/// bound `max |L_ii|`.
fn apply_2d(g: &DensityGrid, s: &Sampled, q: &[f64], out: &mut [f64]) -> f64 {
    let (a0, a1) = (g.axes[0], g.axes[1]);
    let (n0, n1) = (a0.n_cells, a1.n_cells);
    let (d0, d1) = (a0.delta(), a1.delta());
    let at = |i: usize, j: usize| i * n1 + j;
    let dcell = |idx: usize, r: usize, c: usize| s.cell_diff[idx * 4 + r * 2 + c];
    // u_rc = D_rc q per cell
    let u = |r: usize, c: usize, i: usize, j: usize| dcell(at(i, j), r, c) * q[at(i, j)];
    out.iter_mut().for_each(|v| *v = 0.0);
    let mut diag = vec![0.0; n0 * n1];
    // Central difference along axis 1 of u_{r1} at cell (i, j), one-sided at walls.
    let d_along1 = |r: usize, i: usize, j: usize| {
        let (jm, jp) = (j.saturating_sub(1), (j + 1).min(n1 - 1));
        (u(r, 1, i, jp) - u(r, 1, i, jm)) / ((jp - jm).max(1) as f64 * d1)
    };
    let d_along0 = |r: usize, i: usize, j: usize| {
        let (im, ip) = (i.saturating_sub(1), (i + 1).min(n0 - 1));
        (u(r, 0, ip, j) - u(r, 0, im, j)) / ((ip - im).max(1) as f64 * d0)
    };
    // Faces normal to axis 0.
    for i in 0..n0.saturating_sub(1) {
        for j in 0..n1 {
            let mu = s.face_drift[0][(i + 1) * n1 + j];
            let (l, r) = (at(i, j), at(i + 1, j));
            let adv = mu.max(0.0) * q[l] + mu.min(0.0) * q[r];
            let diff = -0.5 * (u(0, 0, i + 1, j) - u(0, 0, i, j)) / d0;
            let cross = -0.5 * 0.5 * (d_along1(0, i, j) + d_along1(0, i + 1, j));
            let flux = adv + diff + cross;
            out[l] -= flux / d0;
            out[r] += flux / d0;
            diag[l] += (mu.max(0.0) + 0.5 * dcell(l, 0, 0) / d0) / d0;
            diag[r] += (-mu.min(0.0) + 0.5 * dcell(r, 0, 0) / d0) / d0;
        }
    }
    // Faces normal to axis 1.
    for i in 0..n0 {
        for j in 0..n1.saturating_sub(1) {
            let mu = s.face_drift[1][i * (n1 + 1) + j + 1];
            let (l, r) = (at(i, j), at(i, j + 1));
            let adv = mu.max(0.0) * q[l] + mu.min(0.0) * q[r];
            let diff = -0.5 * (u(1, 1, i, j + 1) - u(1, 1, i, j)) / d1;
            let cross = -0.5 * 0.5 * (d_along0(1, i, j) + d_along0(1, i, j + 1));
            let flux = adv + diff + cross;
            out[l] -= flux / d1;
            out[r] += flux / d1;
            diag[l] += (mu.max(0.0) + 0.5 * dcell(l, 1, 1) / d1) / d1;
            diag[r] += (-mu.min(0.0) + 0.5 * dcell(r, 1, 1) / d1) / d1;
        }
    }
    diag.iter().copied().fold(0.0, f64::max)
}

fn apply_source(gen: &dyn ZetaGenerator, g: &mut DensityGrid, t: f64, factor: f64) {
    if factor == 0.0 {
        return;
    }
    let q = g.axes.len();
    let mut drift = vec![0.0; q];
    let mut diff = vec![0.0; q * q];
    for idx in 0..g.values.len() {
        let ghat = gen.eval(t, &g.center(idx), &mut drift, &mut diff);
        g.values[idx] *= (factor * ghat).exp();
    }
}

/// One step `t → t + dt`; `theta = 0` turns the source off.
pub fn step_density(
    gen: &dyn ZetaGenerator,
    g: &mut DensityGrid,
    theta: f64,
    dt: f64,
    scheme: TimeScheme,
) -> Result<()> {
    let t = g.t;
    apply_source(gen, g, t, 0.5 * theta * dt);
    let s = sample(gen, g, t + 0.5 * dt);
    let size = g.values.len();
    let mut lq = vec![0.0; size];
    match (g.axes.len(), scheme) {
        (1, TimeScheme::Explicit) => {
            let (lo, di, up) = tridiagonal(g, &s);
            let rate = di.iter().map(|v| -v).fold(0.0, f64::max);
            if dt * rate > 1.0 {
                return Err(Error::Cfl {
                    dt,
                    suggested: 0.9 / rate,
                });
            }
            apply_tridiagonal(&lo, &di, &up, &g.values, &mut lq);
            for (v, l) in g.values.iter_mut().zip(&lq) {
                *v += dt * l;
            }
        }
        (1, TimeScheme::CrankNicolson) => {
            let (lo, di, up) = tridiagonal(g, &s);
            apply_tridiagonal(&lo, &di, &up, &g.values, &mut lq);
            let mut rhs: Vec<f64> = g.values.iter().zip(&lq).map(|(v, l)| v + 0.5 * dt * l).collect();
            let lo_i: Vec<f64> = lo.iter().map(|v| -0.5 * dt * v).collect();
            let di_i: Vec<f64> = di.iter().map(|v| 1.0 - 0.5 * dt * v).collect();
            let up_i: Vec<f64> = up.iter().map(|v| -0.5 * dt * v).collect();
            solve_tridiagonal(&lo_i, &di_i, &up_i, &mut rhs)?;
            g.values = rhs;
        }
        (2, TimeScheme::Explicit) => {
            let rate = apply_2d(g, &s, &g.values, &mut lq);
            // The cross-diffusion terms are not in the diagonal bound.
            if dt * rate > 0.5 {
                return Err(Error::Cfl {
                    dt,
                    suggested: 0.45 / rate,
                });
            }
            for (v, l) in g.values.iter_mut().zip(&lq) {
                *v += dt * l;
            }
        }
        (2, TimeScheme::CrankNicolson) => {
            return Err(Error::Unsupported("Crank-Nicolson is implemented for one-dimensional grids".into()))
        }
        (q, _) => return Err(Error::Unsupported(format!("density grids support one or two axes, got {q}"))),
    }
    g.t = t + dt;
    apply_source(gen, g, g.t, 0.5 * theta * dt);
    g.refresh_mass();
    if !g.mass.is_finite() {
        return Err(Error::Numerical("density lost finiteness".into()));
    }
    Ok(())
}

/// Marches `initial` to `horizon`.
pub fn solve_density(
    gen: &dyn ZetaGenerator,
    initial: DensityGrid,
    theta: f64,
    horizon: f64,
    cfg: &GridConfig,
) -> Result<DensitySolution> {
    let steps = ((horizon / cfg.dt).round() as usize).max(1);
    let dt = horizon / steps as f64;
    let every = if cfg.snapshots == 0 { usize::MAX } else { (steps / (cfg.snapshots + 1)).max(1) };
    let mut g = initial;
    let mut snapshots = vec![g.clone()];
    for k in 0..steps {
        step_density(gen, &mut g, theta, dt, cfg.scheme)?;
        if (k + 1) % every == 0 && k + 1 < steps && snapshots.len() <= cfg.snapshots {
            snapshots.push(g.clone());
        }
    }
    Ok(DensitySolution {
        final_grid: g,
        snapshots,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Constant drift `v`, constant diffusion `d`, constant source `g0`.
    struct Flat {
        v: f64,
        d: f64,
        g0: f64,
    }

    impl ZetaGenerator for Flat {
        fn dim(&self) -> usize {
            1
        }
        fn zeta0(&self) -> Vec<f64> {
            vec![0.0]
        }
        fn eval(&self, _t: f64, _z: &[f64], drift: &mut [f64], diffusion: &mut [f64]) -> f64 {
            drift[0] = self.v;
            diffusion[0] = self.d;
            self.g0
        }
    }

    fn axis(n: usize) -> Vec<Axis> {
        vec![Axis { lo: -2.0, hi: 2.0, n_cells: n }]
    }

    #[test]
    fn pure_source_is_exact() {
        let gen = Flat { v: 0.0, d: 0.0, g0: 0.3 };
        let init = initial_density(&axis(100), &[0.0], 2.0).unwrap();
        let cfg = GridConfig { dt: 0.1, ..GridConfig::default() };
        let sol = solve_density(&gen, init, 0.5, 1.0, &cfg).unwrap();
        assert!((sol.final_grid.mass - (0.5f64 * 0.3).exp()).abs() < 1e-13);
    }

    #[test]
    fn heat_variance_grows_linearly() {
        let gen = Flat { v: 0.0, d: 0.04, g0: 0.0 };
        let init = initial_density(&axis(400), &[0.0], 4.0).unwrap();
        let v0 = init.variance(0);
        let cfg = GridConfig {
            dt: 1.0 / 512.0,
            scheme: TimeScheme::CrankNicolson,
            ..GridConfig::default()
        };
        let sol = solve_density(&gen, init, 0.0, 1.0, &cfg).unwrap();
        let grown = sol.final_grid.variance(0) - v0;
        // Variance grows by D per unit time (the generator is ½ D ∂²).
        assert!((grown - 0.04).abs() < 1e-4, "{grown}");
        assert!((sol.final_grid.mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn advection_moves_the_centre() {
        let gen = Flat { v: 0.5, d: 0.0, g0: 0.0 };
        let init = initial_density(&axis(800), &[0.0], 4.0).unwrap();
        let cfg = GridConfig { dt: 1.0 / 512.0, ..GridConfig::default() };
        let sol = solve_density(&gen, init, 0.0, 1.0, &cfg).unwrap();
        let dz = 4.0 / 800.0;
        assert!((sol.final_grid.mean()[0] - 0.5).abs() < 2.0 * dz);
    }

    #[test]
    fn explicit_step_guards_cfl() {
        let gen = Flat { v: 0.0, d: 1.0, g0: 0.0 };
        let mut g = initial_density(&axis(400), &[0.0], 2.0).unwrap();
        match step_density(&gen, &mut g, 0.0, 0.01, TimeScheme::Explicit) {
            Err(Error::Cfl { suggested, .. }) => assert!(suggested < 0.01),
            other => panic!("expected a CFL error, got {other:?}"),
        }
    }

    #[test]
    fn crank_nicolson_matches_explicit_at_small_steps() {
        let gen = Flat { v: 0.2, d: 0.02, g0: 0.1 };
        let init = initial_density(&axis(100), &[0.0], 2.0).unwrap();
        let mut a = init.clone();
        let mut b = init;
        for _ in 0..100 {
            step_density(&gen, &mut a, 0.5, 1e-3, TimeScheme::Explicit).unwrap();
            step_density(&gen, &mut b, 0.5, 1e-3, TimeScheme::CrankNicolson).unwrap();
        }
        let err = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-3 * a.values.iter().copied().fold(0.0, f64::max));
    }

    struct Flat2;

    impl ZetaGenerator for Flat2 {
        fn dim(&self) -> usize {
            2
        }
        fn zeta0(&self) -> Vec<f64> {
            vec![0.0, 0.0]
        }
        fn eval(&self, _t: f64, _z: &[f64], drift: &mut [f64], diffusion: &mut [f64]) -> f64 {
            drift.copy_from_slice(&[0.1, -0.1]);
            diffusion.copy_from_slice(&[0.04, 0.01, 0.01, 0.02]);
            0.0
        }
    }

    #[test]
    fn two_dimensional_moments() {
        let axes = vec![Axis { lo: -1.5, hi: 1.5, n_cells: 120 }; 2];
        let init = initial_density(&axes, &[0.0, 0.0], 2.0).unwrap();
        let (v0, v1) = (init.variance(0), init.variance(1));
        let cfg = GridConfig { dt: 1.0 / 1024.0, ..GridConfig::default() };
        let sol = solve_density(&Flat2, init, 0.0, 1.0, &cfg).unwrap();
        let g = sol.final_grid;
        assert!((g.mass - 1.0).abs() < 1e-12);
        let mean = g.mean();
        assert!((mean[0] - 0.1).abs() < 0.03 && (mean[1] + 0.1).abs() < 0.03, "{mean:?}");
        // Upwinding adds O(v Δ) numerical diffusion on top of D.
        assert!((g.variance(0) - v0 - 0.04).abs() < 0.01);
        assert!((g.variance(1) - v1 - 0.02).abs() < 0.01);
    }
}
