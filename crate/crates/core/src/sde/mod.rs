//! Time discretization and path simulation.

mod grid;
mod paths;
mod strategy;

pub use grid::TimeGrid;
pub use paths::{
    draw_increment, draw_initial, drift_shift_h, hat_return_coefficients, return_drift, run_filter, simulate_joint,
    simulate_r_original, simulate_r_separated, simulate_wealth_benchmark, FilterTrajectory, HiddenState, JointStepper,
    MeasureTag, PathBundle,
};
pub use strategy::Strategy;
