//! Conditional moments of coefficients under the filter law, and the
//! structural classification that decides which filter statistics suffice.

mod classify;
mod hats;
mod quadrature;

pub use classify::{classify, Case, CoefficientVerdict, SeparabilityReport, Verdict};
pub use hats::{
    hat_exponential, hat_gaussian, hat_linear, hat_on_states, hat_quadratic, hat_quadratic_expansion, hat_quadrature,
    hat_simplex, HatMethod, HatValue,
};
pub use quadrature::{
    gaussian_expectation, gaussian_expectation_mc, Expectation, GaussHermite, DEFAULT_ORDER, MAX_TENSOR_DIM, MC_SAMPLES,
};
