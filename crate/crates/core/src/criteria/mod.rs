//! Risk-sensitive criteria, changes of measure and their Monte-Carlo
//! estimators.

mod engine;
mod estimate;
mod estimators;
mod integrands;
mod kazamaki;
mod ks;

pub use engine::{run_batch, Batch, BatchConfig, PathLedger};
pub use estimate::{
    criterion_from_logs, criterion_from_returns, CriterionEstimate, Filtration, LogMean, RiskSensitiveParams,
    OVERBETTING_WARNING,
};
pub use estimators::{
    equivalence_from_batch, estimate, innovations_qv, martingale_battery, martingale_check, EquivalenceReport,
    Experiment, MartingaleCheck, QuadraticVariation, Quantity, Status,
};
pub use integrands::{doleans_increment, g_from_parts, g_hat_integrand, g_integrand, psi_increment};
pub use kazamaki::{
    hill_tail_index, kazamaki_statistic, kazamaki_statistics, FormComparison, KazamakiReport, KazamakiStatistic,
    HEAVY_TAIL_INDEX,
};
pub use ks::{kallianpur_striebel_check, ClusterResult, KsConfig, KsReport, TestFunction};
