//! Empirical Kazamaki diagnostics. These are statistics, not proofs: the
//! engine never gates a strategy on them.

use serde::Serialize;

use super::engine::Batch;
use super::estimate::LogMean;
use super::estimators::Status;
use crate::error::{Error, Result};
use crate::sde::MeasureTag;

/// Tail index below which `exp(K)` is flagged as heavy-tailed (infinite
/// variance).
pub const HEAVY_TAIL_INDEX: f64 = 2.0;

#[derive(Clone, Debug, Serialize)]
pub struct KazamakiStatistic {
    pub name: &'static str,
    pub measure: MeasureTag,
    /// `mean(exp(K_T))`.
    pub mean: f64,
    pub stderr: f64,
    pub ln_mean: f64,
    /// Hill estimate of the tail index of `exp(K_T)`.
    pub tail_index: f64,
    pub heavy_tail: bool,
    pub n_paths: usize,
}

/// Hill estimator on log-values: for `L = ln X`, the index of `X` is
/// `1 / mean(L_(i) − L_(k))` over the `k` largest. `k = ⌊√n⌋`.
pub fn hill_tail_index(logs: &[f64]) -> f64 {
    let mut v: Vec<f64> = logs.iter().copied().filter(|x| x.is_finite()).collect();
    if v.len() < 4 {
        return f64::INFINITY;
    }
    v.sort_by(|a, b| b.total_cmp(a));
    let k = ((v.len() as f64).sqrt() as usize).max(2);
    let pivot = v[k];
    let mean_excess = v[..k].iter().map(|x| x - pivot).sum::<f64>() / k as f64;
    if mean_excess > 0.0 {
        1.0 / mean_excess
    } else {
        f64::INFINITY
    }
}

pub fn kazamaki_statistic(batch: &Batch, name: &'static str, logs: Vec<f64>) -> Result<KazamakiStatistic> {
    let lm = LogMean::from_logs(&logs)?;
    let tail_index = hill_tail_index(&logs);
    Ok(KazamakiStatistic {
        name,
        measure: batch.config.measure,
        mean: lm.mean(),
        stderr: lm.stderr(),
        ln_mean: lm.ln_mean,
        tail_index,
        heavy_tail: tail_index < HEAVY_TAIL_INDEX,
        n_paths: lm.n,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FormComparison {
    pub x_form: &'static str,
    pub z_form: &'static str,
    pub gap: f64,
    pub combined_stderr: f64,
    pub status: Status,
}

#[derive(Clone, Debug, Serialize)]
pub struct KazamakiReport {
    pub statistics: Vec<KazamakiStatistic>,
    pub comparisons: Vec<FormComparison>,
    pub heavy_tail: bool,
}

fn compare(a: &KazamakiStatistic, b: &KazamakiStatistic) -> FormComparison {
    let gap = a.mean - b.mean;
    let combined_stderr = a.stderr.hypot(b.stderr);
    FormComparison {
        x_form: a.name,
        z_form: b.name,
        gap,
        combined_stderr,
        status: Status::from_bool(gap.abs() <= 3.0 * combined_stderr + 1e-12),
    }
}

/// The four Kazamaki expectations from a `P` batch (first pair) and a `P^h`
/// batch (second pair), with the X-form/Z-form gaps.
pub fn kazamaki_statistics(under_p: &Batch, under_ph: &Batch) -> Result<KazamakiReport> {
    if under_p.config.measure != MeasureTag::P || under_ph.config.measure != MeasureTag::Ph {
        return Err(Error::Validation("Kazamaki statistics need a P batch and a P^h batch".into()));
    }
    let k1x = kazamaki_statistic(under_p, "K1_X", under_p.collect(|l| l.k1x))?;
    let k1z = kazamaki_statistic(under_p, "K1_Z", under_p.collect(|l| l.k1z))?;
    let k2x = kazamaki_statistic(under_ph, "K2_X", under_ph.collect(|l| l.k2x))?;
    let k2z = kazamaki_statistic(under_ph, "K2_Z", under_ph.collect(|l| l.k2z))?;
    let comparisons = vec![compare(&k1x, &k1z), compare(&k2x, &k2z)];
    let statistics = vec![k1x, k1z, k2x, k2z];
    Ok(KazamakiReport {
        heavy_tail: statistics.iter().any(|s| s.heavy_tail),
        statistics,
        comparisons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal, Pareto};

    #[test]
    fn hill_recovers_pareto_index() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let p: Pareto<f64> = Pareto::new(1.0, 1.5).unwrap();
        let logs: Vec<f64> = (0..40_000).map(|_| p.sample(&mut rng).ln()).collect();
        let a = hill_tail_index(&logs);
        assert!((a - 1.5).abs() < 0.2, "{a}");
    }

    #[test]
    fn lognormal_with_small_spread_is_light() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let nrm = Normal::new(0.0, 0.05).unwrap();
        let logs: Vec<f64> = (0..10_000).map(|_| nrm.sample(&mut rng)).collect();
        assert!(hill_tail_index(&logs) > 10.0);
    }
}
