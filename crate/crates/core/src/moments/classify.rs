//! Structural separability classification.

use serde::Serialize;

use crate::model::{CoefficientMap, ModelSpec, StructureTag};
use crate::scalar::Real;

/// Ordered from strongest to weakest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Strict,
    Wider,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Case {
    #[serde(rename = "linear/strict")]
    Linear,
    #[serde(rename = "quadratic/wider")]
    Quadratic,
    #[serde(rename = "quadratic-expansion/wider")]
    QuadraticExpansion,
    #[serde(rename = "exponential/wider")]
    Exponential,
    /// Any family under a finite-state hidden chain: hats are finite sums
    /// over the states.
    #[serde(rename = "simplex/wider")]
    Simplex,
    #[serde(rename = "general/none")]
    General,
}

impl Case {
    pub fn verdict(self) -> Verdict {
        match self {
            Case::Linear => Verdict::Strict,
            Case::General => Verdict::None,
            _ => Verdict::Wider,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Case::Linear => "linear/strict",
            Case::Quadratic => "quadratic/wider",
            Case::QuadraticExpansion => "quadratic-expansion/wider",
            Case::Exponential => "exponential/wider",
            Case::Simplex => "simplex/wider",
            Case::General => "general/none",
        }
    }

    fn statistics(self) -> &'static [&'static str] {
        match self {
            Case::Linear => &["m"],
            Case::Quadratic | Case::QuadraticExpansion | Case::Exponential => &["m", "Pi"],
            Case::Simplex => &["p"],
            Case::General => &[],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoefficientVerdict {
    pub coefficient: String,
    pub classification: Case,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparabilityReport {
    pub coefficients: Vec<CoefficientVerdict>,
    pub verdict: Verdict,
    pub required_statistics: Vec<String>,
}

fn case_of<T: Real>(map: &CoefficientMap<T>, n: usize, categorical: bool) -> Case {
    match map.structure() {
        StructureTag::Constant | StructureTag::Linear => Case::Linear,
        _ if categorical => Case::Simplex,
        StructureTag::Quadratic if n == 1 => Case::Quadratic,
        StructureTag::Quadratic => Case::QuadraticExpansion,
        StructureTag::Exponential => Case::Exponential,
        StructureTag::General => Case::General,
    }
}

/// Classifies the drifts entering the observation (`bf`, `a`, `c`, `aE`);
/// the overall verdict is the weakest of them.
pub fn classify<T: Real>(spec: &ModelSpec<T>) -> SeparabilityReport {
    let coef = spec.coefficients();
    let n = spec.dims().n;
    let categorical = spec.x0().is_categorical();
    let coefficients: Vec<CoefficientVerdict> = [("bf", &coef.bf), ("a", &coef.a), ("c", &coef.c), ("aE", &coef.ae)]
        .into_iter()
        .filter(|(_, m)| m.shape().0 > 0)
        .map(|(name, m)| CoefficientVerdict {
            coefficient: name.into(),
            classification: case_of(m, n, categorical),
        })
        .collect();
    let verdict = coefficients
        .iter()
        .map(|c| c.classification.verdict())
        .max()
        .unwrap_or(Verdict::Strict);
    let mut required_statistics: Vec<String> = Vec::new();
    if verdict != Verdict::None {
        for c in &coefficients {
            for s in c.classification.statistics() {
                if !required_statistics.iter().any(|r| r == s) {
                    required_statistics.push((*s).into());
                }
            }
        }
    }
    SeparabilityReport {
        coefficients,
        verdict,
        required_statistics,
    }
}
