//! Finite-dimensional filters and a particle oracle.

mod gaussian;
mod innovations;
mod particle;
mod runner;
mod wonham;
mod zeta;

pub use gaussian::{
    ekf_linearize, ekf_step, kalman_bucy_step, kalman_gain, riccati_rhs, GaussianFilterState, KalmanSchedule,
    Linearization,
};
pub use innovations::{innovations_increment, Innovation};
pub use particle::{run_particle_filter, systematic_resample, ParticleCloud, ParticleTrace};
pub use runner::{hat_observation_drift, FilterRunner, RunnerState};
pub use wonham::{check_generator, wonham_step, SimplexFilterState, WonhamFilter};
pub use zeta::{gaussian_filter_as_zeta, gaussian_from_zeta, gaussian_zeta, wonham_as_zeta, FilterDriftDiffusion};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    #[serde(alias = "KF")]
    Kf,
    #[serde(alias = "EKF")]
    Ekf,
    #[serde(alias = "Wonham")]
    Wonham,
    Particle,
}

impl std::str::FromStr for FilterKind {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "kf" | "kalman" => Ok(FilterKind::Kf),
            "ekf" => Ok(FilterKind::Ekf),
            "wonham" => Ok(FilterKind::Wonham),
            "particle" | "pf" => Ok(FilterKind::Particle),
            other => Err(crate::error::Error::Scenario(format!("unknown filter kind `{other}`"))),
        }
    }
}

/// Either kind of filter state.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum FilterState<T: crate::scalar::Real> {
    Gaussian(GaussianFilterState<T>),
    Simplex(SimplexFilterState<T>),
}
