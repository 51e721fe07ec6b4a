use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sde::MeasureTag;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RiskSensitiveParams<T: Real> {
    pub theta: T,
    pub horizon: T,
    pub r0: T,
}

pub const OVERBETTING_WARNING: &str = "overbetting regime, well-posedness not guaranteed";

impl<T: Real> RiskSensitiveParams<T> {
    pub fn new(theta: T, horizon: T, r0: T) -> Result<Self> {
        let p = Self { theta, horizon, r0 };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        if self.theta == T::zero() || self.theta <= -T::one() || !self.theta.is_finite_value() {
            return Err(Error::Validation(format!(
                "risk sensitivity must lie in (-1, 0) or (0, inf), got {}",
                self.theta.as_f64()
            )));
        }
        if !(self.r0 > T::zero()) {
            return Err(Error::Validation(format!("r0 must be positive, got {}", self.r0.as_f64())));
        }
        if !(self.horizon > T::zero()) {
            return Err(Error::Validation("horizon must be positive".into()));
        }
        Ok(())
    }

    pub fn warning(&self) -> Option<&'static str> {
        (self.theta < T::zero()).then_some(OVERBETTING_WARNING)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Filtration {
    Original,
    Separated,
}

/// Monte-Carlo estimate of a criterion. `J_value = −ln(I_value)/θ` holds
/// exactly by construction.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct CriterionEstimate {
    pub J_value: f64,
    pub I_value: f64,
    pub stderr_I: f64,
    pub stderr_J: f64,
    pub n_paths: usize,
    pub n_diverged: usize,
    pub measure_tag: MeasureTag,
    pub filtration_tag: Filtration,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Mean of `exp(l_i)` with its standard error, in log space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogMean {
    /// `ln mean(exp(l))`.
    pub ln_mean: f64,
    /// Standard error of `mean(exp(l))` relative to the mean.
    pub rel_stderr: f64,
    pub n: usize,
}

impl LogMean {
    pub fn from_logs(logs: &[f64]) -> Result<Self> {
        let n = logs.len();
        if n == 0 {
            return Err(Error::Estimation("no usable paths".into()));
        }
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Estimation("log weights are not finite".into()));
        }
        let (mut s1, mut s2) = (0.0, 0.0);
        for l in logs {
            let w = (l - max).exp();
            s1 += w;
            s2 += w * w;
        }
        let nf = n as f64;
        let mean = s1 / nf;
        let var = if n > 1 { ((s2 / nf - mean * mean) * nf / (nf - 1.0)).max(0.0) } else { 0.0 };
        Ok(Self {
            ln_mean: max + mean.ln(),
            rel_stderr: (var / nf).sqrt() / mean,
            n,
        })
    }

    pub fn mean(&self) -> f64 {
        self.ln_mean.exp()
    }

    pub fn stderr(&self) -> f64 {
        self.mean() * self.rel_stderr
    }
}

/// Builds the estimate of `I = r0^{-θ} mean(exp(l_i))`.
pub fn criterion_from_logs<T: Real>(
    params: &RiskSensitiveParams<T>,
    logs: &[f64],
    n_diverged: usize,
    measure: MeasureTag,
    filtration: Filtration,
) -> Result<CriterionEstimate> {
    if logs.is_empty() {
        return Err(Error::Estimation(format!("all {n_diverged} paths diverged")));
    }
    let theta = params.theta.as_f64();
    let lm = LogMean::from_logs(logs)?;
    let ln_i = -theta * params.r0.as_f64().ln() + lm.ln_mean;
    let i_value = ln_i.exp();
    Ok(CriterionEstimate {
        J_value: -ln_i / theta,
        I_value: i_value,
        stderr_I: i_value * lm.rel_stderr,
        stderr_J: lm.rel_stderr / theta.abs(),
        n_paths: logs.len(),
        n_diverged,
        measure_tag: measure,
        filtration_tag: filtration,
        warning: params.warning().map(str::to_owned),
    })
}

/// `I` and `J` from terminal returns: `l_i = −θ R_T`.
pub fn criterion_from_returns<T: Real>(
    params: &RiskSensitiveParams<T>,
    r_terminal: &[f64],
    n_diverged: usize,
    measure: MeasureTag,
    filtration: Filtration,
) -> Result<CriterionEstimate> {
    let theta = params.theta.as_f64();
    let logs: Vec<f64> = r_terminal.iter().map(|r| -theta * r).collect();
    criterion_from_logs(params, &logs, n_diverged, measure, filtration)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn deterministic_return() {
        let p = RiskSensitiveParams::new(0.5, 1.0, 1.0).unwrap();
        let e = criterion_from_returns(&p, &[1.02; 10], 0, MeasureTag::P, Filtration::Original).unwrap();
        assert_relative_eq!(e.J_value, 1.02, epsilon = 1e-14);
        assert_eq!(e.stderr_I, 0.0);
        assert_relative_eq!(e.J_value, -e.I_value.ln() / 0.5, epsilon = 1e-15);
    }

    #[test]
    fn parameter_checks() {
        assert!(RiskSensitiveParams::new(0.0, 1.0, 1.0).is_err());
        assert!(RiskSensitiveParams::new(-1.0, 1.0, 1.0).is_err());
        assert!(RiskSensitiveParams::new(0.5, 1.0, 0.0).is_err());
        let neg = RiskSensitiveParams::new(-0.5, 1.0, 1.0).unwrap();
        assert_eq!(neg.warning(), Some(OVERBETTING_WARNING));
    }

    #[test]
    fn log_mean_survives_huge_exponents() {
        let lm = LogMean::from_logs(&[1000.0, 1000.0]).unwrap();
        assert_relative_eq!(lm.ln_mean, 1000.0);
        assert!(criterion_from_logs(&RiskSensitiveParams::new(1.0, 1.0, 1.0).unwrap(), &[], 3, MeasureTag::P, Filtration::Original).is_err());
    }
}
