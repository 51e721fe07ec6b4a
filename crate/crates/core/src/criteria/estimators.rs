use serde::Serialize;

use super::engine::{run_batch, Batch, BatchConfig, PathLedger};
use super::estimate::{criterion_from_logs, CriterionEstimate, Filtration, LogMean, RiskSensitiveParams};
use crate::error::{Error, Result};
use crate::filter::FilterKind;
use crate::model::ModelSpec;
use crate::sde::{MeasureTag, Strategy, TimeGrid};

/// Which pathwise functional a criterion averages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// `e^{−θR_T}` under `P`.
    Original,
    /// `e^{−θR̃_T}` under `P`.
    Separated,
    /// `χ_T e^{θ∫g − θr0}` under `P`.
    ChiWeighted,
    /// `e^{θ∫g − θr0}` under `P^h`.
    Jh,
    /// `e^{θ∫ĝ − θr0}` under `P^h` (or `P̂^h`).
    JhatH,
    /// `Ψ^Z_T e^{θ∫ĝ − θr0}` under `P̄`.
    IBar,
}

impl Quantity {
    pub fn measure(self) -> MeasureTag {
        match self {
            Quantity::Original | Quantity::Separated | Quantity::ChiWeighted => MeasureTag::P,
            Quantity::Jh | Quantity::JhatH => MeasureTag::Ph,
            Quantity::IBar => MeasureTag::Pbar,
        }
    }

    fn admits(self, m: MeasureTag) -> bool {
        m == self.measure() || (self == Quantity::JhatH && m == MeasureTag::PhatH)
    }

    pub fn filtration(self) -> Filtration {
        match self {
            Quantity::Original | Quantity::ChiWeighted | Quantity::Jh => Filtration::Original,
            _ => Filtration::Separated,
        }
    }

    /// Log of the averaged term, without the `r0^{−θ}` prefactor.
    pub fn log_term(self, theta: f64, r0: f64, l: &PathLedger) -> f64 {
        match self {
            Quantity::Original => -theta * l.r_orig,
            Quantity::Separated => -theta * l.r_sep,
            Quantity::ChiWeighted => l.log_chi + theta * (l.int_g - r0),
            Quantity::Jh => theta * (l.int_g - r0),
            Quantity::JhatH => theta * (l.int_ghat - r0),
            Quantity::IBar => l.log_psi + theta * (l.int_ghat - r0),
        }
    }
}

pub fn estimate(batch: &Batch, q: Quantity) -> Result<CriterionEstimate> {
    let m = batch.config.measure;
    if !q.admits(m) {
        return Err(Error::Validation(format!("{q:?} is not defined on a batch simulated under {m:?}")));
    }
    let p = batch.config.params;
    let logs = batch.collect(|l| q.log_term(p.theta, p.r0, l));
    criterion_from_logs(&p, &logs, batch.n_diverged(), m, q.filtration())
}

/// Model, strategy and Monte-Carlo settings shared by the estimators.
#[derive(Clone, Copy)]
pub struct Experiment<'a> {
    pub spec: &'a ModelSpec<f64>,
    pub strategy: &'a Strategy<f64>,
    pub params: RiskSensitiveParams<f64>,
    pub grid: TimeGrid<f64>,
    pub seed: u64,
    pub n_paths: usize,
    pub filter_kind: Option<FilterKind>,
}

impl Experiment<'_> {
    pub fn batch(&self, measure: MeasureTag) -> Result<Batch> {
        run_batch(
            self.spec,
            self.strategy,
            self.filter_kind,
            BatchConfig {
                params: self.params,
                grid: self.grid,
                seed: self.seed,
                n_paths: self.n_paths,
                measure,
            },
        )
    }

    pub fn estimate(&self, q: Quantity) -> Result<CriterionEstimate> {
        estimate(&self.batch(q.measure())?, q)
    }

    pub fn j_original(&self) -> Result<CriterionEstimate> {
        self.estimate(Quantity::Original)
    }

    pub fn j_separated(&self) -> Result<CriterionEstimate> {
        self.estimate(Quantity::Separated)
    }

    pub fn j_h(&self) -> Result<CriterionEstimate> {
        self.estimate(Quantity::Jh)
    }

    pub fn i_bar(&self) -> Result<CriterionEstimate> {
        self.estimate(Quantity::IBar)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Status {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
}

impl Status {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

/// `J` against `Ĵ` on common random numbers.
#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    pub original: CriterionEstimate,
    pub separated: CriterionEstimate,
    pub gap: f64,
    /// `sqrt(stderr_J² + stderr_Ĵ²)`.
    pub combined_stderr: f64,
    /// Stderr of the gap itself, using the pairing of the paths.
    pub paired_stderr: f64,
    pub max_pathwise_gap: f64,
    pub filter_kind: FilterKind,
    pub status: Status,
}

pub fn equivalence_from_batch(batch: &Batch) -> Result<EquivalenceReport> {
    let original = estimate(batch, Quantity::Original)?;
    let separated = estimate(batch, Quantity::Separated)?;
    let theta = batch.config.params.theta;
    let ok: Vec<&PathLedger> = batch.ledgers.iter().filter(|l| !l.diverged).collect();
    // Delta method on the paired difference of normalized weights.
    let lo = LogMean::from_logs(&ok.iter().map(|l| -theta * l.r_orig).collect::<Vec<_>>())?;
    let ls = LogMean::from_logs(&ok.iter().map(|l| -theta * l.r_sep).collect::<Vec<_>>())?;
    let diffs: Vec<f64> = ok
        .iter()
        .map(|l| (-theta * l.r_orig - lo.ln_mean).exp() - (-theta * l.r_sep - ls.ln_mean).exp())
        .collect();
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let paired_stderr = (var / n).sqrt() / theta.abs();
    let max_pathwise_gap = ok.iter().map(|l| (l.r_orig - l.r_sep).abs()).fold(0.0, f64::max);
    let gap = original.J_value - separated.J_value;
    let combined_stderr = original.stderr_J.hypot(separated.stderr_J);
    Ok(EquivalenceReport {
        status: Status::from_bool(gap.abs() <= 3.0 * combined_stderr + 1e-12),
        original,
        separated,
        gap,
        combined_stderr,
        paired_stderr,
        max_pathwise_gap,
        filter_kind: batch.filter_kind,
    })
}

/// Sample mean of an exponential martingale at the horizon.
#[derive(Clone, Debug, Serialize)]
pub struct MartingaleCheck {
    pub name: &'static str,
    pub measure: MeasureTag,
    pub mean: f64,
    pub stderr: f64,
    /// `(mean − 1)/stderr`.
    pub z: f64,
    pub n_paths: usize,
}

impl MartingaleCheck {
    pub fn passes(&self, k: f64) -> bool {
        (self.mean - 1.0).abs() <= k * self.stderr + 1e-12
    }
}

pub fn martingale_check(batch: &Batch, name: &'static str, f: impl Fn(&PathLedger) -> f64) -> Result<MartingaleCheck> {
    let lm = LogMean::from_logs(&batch.collect(f))?;
    let (mean, stderr) = (lm.mean(), lm.stderr());
    Ok(MartingaleCheck {
        name,
        measure: batch.config.measure,
        mean,
        stderr,
        z: if stderr > 0.0 { (mean - 1.0) / stderr } else { 0.0 },
        n_paths: lm.n,
    })
}

/// The martingales a batch can check, by measure: `χ^h`, `χ̂^h` under `P`;
/// `χ̄^Z` under `P^h`; `Ψ^Z` under `P̄`.
pub fn martingale_battery(batch: &Batch) -> Result<Vec<MartingaleCheck>> {
    match batch.config.measure {
        MeasureTag::P => Ok(vec![
            martingale_check(batch, "chi", |l| l.log_chi)?,
            martingale_check(batch, "chi_hat", |l| l.log_chi_hat)?,
        ]),
        MeasureTag::Ph | MeasureTag::PhatH => Ok(vec![martingale_check(batch, "chi_bar", |l| l.log_chi_bar)?]),
        MeasureTag::Pbar => Ok(vec![martingale_check(batch, "psi", |l| l.log_psi)?]),
    }
}

/// Realized quadratic variation of one component of `U` over the horizon.
#[derive(Clone, Debug, Serialize)]
pub struct QuadraticVariation {
    pub component: usize,
    pub mean: f64,
    pub stderr: f64,
    pub expected: f64,
}

pub fn innovations_qv(batch: &Batch) -> Vec<QuadraticVariation> {
    let horizon = batch.config.grid.horizon - batch.config.grid.t0;
    batch
        .active
        .iter()
        .enumerate()
        .filter(|(_, a)| **a)
        .map(|(i, _)| {
            let v = batch.collect(|l| l.u_qv[i]);
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            QuadraticVariation {
                component: i,
                mean,
                stderr: (var / n).sqrt(),
                expected: horizon,
            }
        })
        .collect()
}
