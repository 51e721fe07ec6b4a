//! Deterministic weighted-density equation on the filter parameters, and
//! its cross-check against Monte Carlo.

mod dynamics;
mod solver;

pub use dynamics::{build_generator, AutonomousZetaDynamics, ZetaGenerator};
pub use solver::{
    choose_domain, initial_density, solve_density, step_density, Axis, DensityGrid, DensitySolution, GridConfig,
    TimeScheme,
};

use serde::Serialize;

use crate::criteria::RiskSensitiveParams;
use crate::error::{Error, Result};
use crate::filter::{FilterKind, FilterRunner};
use crate::model::ModelSpec;
use crate::sde::Strategy;

/// Control runs that push more than this fraction of the mass into the
/// boundary band are rejected.
pub const MAX_BOUNDARY_LEAK: f64 = 0.01;

/// Cells at each wall counted as the boundary band.
pub const BOUNDARY_BAND: usize = 2;

#[derive(Clone, Debug, Serialize)]
#[allow(non_snake_case)]
pub struct MzeSummary {
    pub qT1: f64,
    /// `r0^{−θ} e^{−θ r0} qT1`, the same normalization as the Monte-Carlo
    /// criteria.
    pub I_bar: f64,
    pub J_bar: f64,
    pub grid: Vec<usize>,
    pub dt: f64,
    /// `|∫q_T − 1|` in the run without source.
    pub mass_control_error: f64,
    /// Mass near the walls at the end of the run without source.
    pub boundary_mass: f64,
    pub domain: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct MzeSolution {
    pub summary: MzeSummary,
    pub density: DensitySolution,
}

/// Solves for `q(T)` on the model's filter parameters.
pub fn solve_q(
    spec: &ModelSpec<f64>,
    strategy: &Strategy<f64>,
    params: &RiskSensitiveParams<f64>,
    kind: Option<FilterKind>,
    cfg: &GridConfig,
) -> Result<MzeSolution> {
    let horizon = params.horizon;
    let steps = ((horizon / cfg.dt).round() as usize).max(1);
    let kind = kind.unwrap_or_else(|| FilterRunner::default_kind(spec));
    let gen = build_generator(spec, strategy, params, kind, horizon / steps as f64, steps)?;
    solve_with(&gen, params, cfg)
}

/// [`solve_q`] for an already assembled generator.
pub fn solve_with(gen: &dyn ZetaGenerator, params: &RiskSensitiveParams<f64>, cfg: &GridConfig) -> Result<MzeSolution> {
    let horizon = params.horizon;
    let axes = choose_domain(gen, horizon, cfg);
    let init = initial_density(&axes, &gen.zeta0(), cfg.init_width_cells)?;
    let control = solve_density(gen, init.clone(), 0.0, horizon, cfg)?;
    let boundary_mass = control.final_grid.boundary_mass(BOUNDARY_BAND);
    if boundary_mass > MAX_BOUNDARY_LEAK {
        return Err(Error::BoundaryLeak { leak: boundary_mass });
    }
    let mass_control_error = (control.final_grid.mass - 1.0).abs();
    let density = solve_density(gen, init, params.theta, horizon, cfg)?;
    let q_t1 = density.final_grid.mass;
    let theta = params.theta;
    let ln_i = -theta * params.r0.ln() - theta * params.r0 + q_t1.ln();
    Ok(MzeSolution {
        summary: MzeSummary {
            qT1: q_t1,
            I_bar: ln_i.exp(),
            J_bar: -ln_i / theta,
            grid: axes.iter().map(|a| a.n_cells).collect(),
            dt: horizon / density.steps as f64,
            mass_control_error,
            boundary_mass,
            domain: axes.iter().map(|a| (a.lo, a.hi)).collect(),
        },
        density,
    })
}
