//! Scenario files (TOML or JSON) and the preset registry.
//!
//! A scenario either spells out a model or names a preset; any block given
//! next to `preset` replaces the preset's block of the same name.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::criteria::{KsConfig, RiskSensitiveParams, TestFunction};
use crate::error::{Error, Result};
use crate::filter::FilterKind;
use crate::model::{CoefficientMap, Coefficients, Dimensions, Family, HiddenLaw, ModelSpec};
use crate::mze::GridConfig;
use crate::sde::{Strategy, TimeGrid};

/// Scalar, vector or row-list matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawMat {
    Scalar(f64),
    Vector(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

impl RawMat {
    /// Matrix with `rows` rows; the column count is read off the data. A
    /// flat list is a column when `rows > 1` and a row otherwise.
    fn with_rows(&self, rows: usize, what: &str) -> Result<DMatrix<f64>> {
        let m = match self {
            RawMat::Scalar(v) => DMatrix::from_element(1, 1, *v),
            RawMat::Vector(v) if rows == 1 => DMatrix::from_row_slice(1, v.len(), v),
            RawMat::Vector(v) => DMatrix::from_column_slice(v.len(), 1, v),
            RawMat::Matrix(r) => {
                let cols = r.first().map_or(0, Vec::len);
                if r.iter().any(|row| row.len() != cols) {
                    return Err(Error::Scenario(format!("{what}: ragged matrix")));
                }
                DMatrix::from_fn(r.len(), cols, |i, j| r[i][j])
            }
        };
        if m.nrows() != rows && !(rows == 0 && m.is_empty()) {
            return Err(Error::shape(what, format!("{rows} rows"), m.nrows()));
        }
        Ok(if rows == 0 { DMatrix::zeros(0, m.ncols()) } else { m })
    }

    fn matrix(&self, rows: usize, cols: usize, what: &str) -> Result<DMatrix<f64>> {
        let m = match self {
            RawMat::Vector(v) if cols == 1 => DMatrix::from_column_slice(v.len(), 1, v),
            _ => self.with_rows(rows, what)?,
        };
        if m.shape() != (rows, cols) {
            return Err(Error::shape(what, format!("{rows}x{cols}"), format!("{}x{}", m.nrows(), m.ncols())));
        }
        Ok(m)
    }

    fn vector(&self, len: usize, what: &str) -> Result<DVector<f64>> {
        let v: Vec<f64> = match self {
            RawMat::Scalar(v) => vec![*v],
            RawMat::Vector(v) => v.clone(),
            RawMat::Matrix(r) if r.iter().all(|row| row.len() == 1) => r.iter().map(|row| row[0]).collect(),
            RawMat::Matrix(_) => return Err(Error::Scenario(format!("{what}: expected a vector"))),
        };
        if v.len() != len {
            return Err(Error::shape(what, len, v.len()));
        }
        Ok(DVector::from_vec(v))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantParams {
    pub value: RawMat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineParams {
    pub offset: RawMat,
    pub x_slope: Option<RawMat>,
    pub y_slope: Option<RawMat>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticParams {
    pub offset: RawMat,
    pub linear: Option<RawMat>,
    /// One `n × n` form per output component.
    pub quad: Vec<RawMat>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentialParams {
    pub offset: RawMat,
    pub scale: RawMat,
    pub eta: RawMat,
    pub shift: Option<RawMat>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabulatedParams {
    #[serde(default)]
    pub axis: usize,
    pub nodes: Vec<f64>,
    pub values: RawMat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "lowercase")]
pub enum RawCoefficient {
    Zero,
    Constant(ConstantParams),
    Affine(AffineParams),
    Quadratic(QuadraticParams),
    Exponential(ExponentialParams),
    Tabulated(TabulatedParams),
}

impl RawCoefficient {
    fn build(&self, name: &str, rows: usize, cols: usize, n: usize, my: usize) -> Result<CoefficientMap<f64>> {
        let len = rows * cols;
        let w = |field: &str| format!("{name}.{field}");
        let family = match self {
            RawCoefficient::Zero => return Ok(CoefficientMap::zeros(rows, cols, n, my)),
            RawCoefficient::Constant(p) => Family::Constant {
                value: p.value.matrix(rows, cols, &w("value"))?,
            },
            RawCoefficient::Affine(p) => Family::Affine {
                offset: p.offset.matrix(rows, cols, &w("offset"))?,
                x_slope: opt_matrix(&p.x_slope, len, n, &w("x_slope"))?,
                y_slope: opt_matrix(&p.y_slope, len, my, &w("y_slope"))?,
            },
            RawCoefficient::Quadratic(p) => Family::Quadratic {
                offset: p.offset.vector(rows, &w("offset"))?,
                linear: opt_matrix(&p.linear, rows, n, &w("linear"))?,
                quad: p
                    .quad
                    .iter()
                    .map(|q| q.matrix(n, n, &w("quad")))
                    .collect::<Result<_>>()?,
            },
            RawCoefficient::Exponential(p) => Family::Exponential {
                offset: p.offset.vector(rows, &w("offset"))?,
                scale: p.scale.vector(rows, &w("scale"))?,
                eta: p.eta.matrix(rows, n, &w("eta"))?,
                shift: match &p.shift {
                    Some(s) => s.vector(rows, &w("shift"))?,
                    None => DVector::zeros(rows),
                },
            },
            RawCoefficient::Tabulated(p) => Family::Tabulated {
                axis: p.axis,
                nodes: p.nodes.clone(),
                values: p.values.matrix(rows, p.nodes.len(), &w("values"))?,
            },
        };
        CoefficientMap::new(rows, cols, n, my, family)
    }
}

fn opt_matrix(m: &Option<RawMat>, rows: usize, cols: usize, what: &str) -> Result<DMatrix<f64>> {
    match m {
        Some(m) => m.matrix(rows, cols, what),
        None => Ok(DMatrix::zeros(rows, cols)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDims {
    #[serde(default)]
    pub ell: usize,
    pub n: usize,
    pub m: usize,
    pub m1: Option<usize>,
    #[serde(default)]
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum RawLaw {
    Gaussian {
        mean: RawMat,
        cov: RawMat,
    },
    Categorical {
        states: RawMat,
        probs: Vec<f64>,
        generator: RawMat,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawStrategy {
    pub constant: Option<Vec<f64>>,
    pub offset: Option<Vec<f64>>,
    pub gain: Option<RawMat>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawParams {
    pub theta: f64,
    #[serde(default = "one")]
    pub r0: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGrid {
    pub dt: Option<f64>,
    pub steps: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSettings {
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_paths() -> usize {
    10_000
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            n_paths: default_paths(),
            seed: 0,
        }
    }
}

/// Settings of the `filter` subcommand.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSettings {
    /// Observation paths written out; capped by `mc.n_paths`.
    pub paths: usize,
    /// Particles of the oracle filter; `0` disables the comparison.
    pub particles: usize,
}

impl Default for FilterSettings {
    fn default() -> Self {
        Self {
            paths: 8,
            particles: 2000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KsSettings {
    /// `"one"` or `"x0"`, `"x1"`, ...
    #[serde(with = "phi_name")]
    pub phi: TestFunction,
    pub with_g: bool,
    pub n_clusters: usize,
    pub paths_per_cluster: usize,
    pub min_ess: f64,
}

impl Default for KsSettings {
    fn default() -> Self {
        Self {
            phi: TestFunction::Coordinate(0),
            with_g: true,
            n_clusters: 100,
            paths_per_cluster: 1000,
            min_ess: 20.0,
        }
    }
}

impl From<KsSettings> for KsConfig {
    fn from(s: KsSettings) -> Self {
        KsConfig {
            phi: s.phi,
            with_g: s.with_g,
            n_clusters: s.n_clusters,
            paths_per_cluster: s.paths_per_cluster,
            min_ess: s.min_ess,
        }
    }
}

mod phi_name {
    use super::TestFunction;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(phi: &TestFunction, s: S) -> Result<S::Ok, S::Error> {
        match phi {
            TestFunction::One => s.serialize_str("one"),
            TestFunction::Coordinate(i) => s.serialize_str(&format!("x{i}")),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<TestFunction, D::Error> {
        let name = String::deserialize(d)?;
        if name == "one" {
            return Ok(TestFunction::One);
        }
        name.strip_prefix('x')
            .and_then(|i| i.parse().ok())
            .map(TestFunction::Coordinate)
            .ok_or_else(|| D::Error::custom(format!("unknown test function `{name}`")))
    }
}

/// A scenario file as written.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub preset: Option<String>,
    pub dims: Option<RawDims>,
    pub horizon: Option<f64>,
    pub y0: Option<Vec<f64>>,
    pub x0: Option<RawLaw>,
    pub b: Option<RawCoefficient>,
    pub lambda: Option<RawCoefficient>,
    pub bf: Option<RawCoefficient>,
    pub lambdaf: Option<RawCoefficient>,
    pub a: Option<RawCoefficient>,
    pub sigma: Option<RawCoefficient>,
    pub c: Option<RawCoefficient>,
    pub xi: Option<RawCoefficient>,
    #[serde(rename = "aE")]
    pub ae: Option<RawCoefficient>,
    #[serde(rename = "sigmaE")]
    pub sigmae: Option<RawCoefficient>,
    pub filter_kind: Option<FilterKind>,
    pub strategy: Option<RawStrategy>,
    pub params: Option<RawParams>,
    pub grid: Option<RawGrid>,
    pub mc: Option<McSettings>,
    pub out: Option<PathBuf>,
    pub filter: Option<FilterSettings>,
    pub mze: Option<GridConfig>,
    pub ks: Option<KsSettings>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f; } )*
    };
}

impl ScenarioFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Scenario(e.to_string()))
    }

    /// Picks the format from the extension; anything but `.json` is TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json(&text),
            _ => Self::from_toml(&text),
        }
    }

    /// Fills in the named preset under the blocks given here.
    pub fn resolve_preset(self) -> Result<Self> {
        let Some(name) = self.preset.clone() else {
            return Ok(self);
        };
        let mut base = preset_file(&name)?;
        let top = self;
        overlay!(base, top; dims, horizon, y0, x0, b, lambda, bf, lambdaf, a, sigma, c, xi, ae, sigmae,
            filter_kind, strategy, params, grid, mc, out, filter, mze, ks);
        base.preset = Some(name);
        Ok(base)
    }
}

/// Command-line overrides; `None` keeps the scenario's value.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub dt: Option<f64>,
    pub theta: Option<f64>,
    pub out: Option<PathBuf>,
}

/// A fully resolved scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: Option<String>,
    pub spec: ModelSpec<f64>,
    pub strategy: Strategy<f64>,
    pub params: RiskSensitiveParams<f64>,
    pub grid: TimeGrid<f64>,
    pub mc: McSettings,
    pub filter_kind: Option<FilterKind>,
    pub out: PathBuf,
    pub filter: FilterSettings,
    pub mze: GridConfig,
    pub ks: KsSettings,
}

impl Scenario {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        Self::build(ScenarioFile::load(path)?, overrides)
    }

    pub fn build(file: ScenarioFile, overrides: &Overrides) -> Result<Self> {
        let file = file.resolve_preset()?;
        let missing = |what: &str| Error::Scenario(format!("missing `{what}`"));
        let rd = file.dims.ok_or_else(|| missing("dims"))?;
        let dims = Dimensions::new(rd.ell, rd.n, rd.m, rd.m1.unwrap_or(rd.m), rd.k)?;
        let (n, my, d) = (dims.n, dims.my(), dims.d());
        let horizon = file.horizon.unwrap_or(1.0);

        let y0 = match &file.y0 {
            Some(v) => RawMat::Vector(v.clone()).vector(my, "y0")?,
            None => DVector::zeros(my),
        };
        let x0 = match file.x0.as_ref().ok_or_else(|| missing("x0"))? {
            RawLaw::Gaussian { mean, cov } => HiddenLaw::Gaussian {
                mean: mean.vector(n, "x0.mean")?,
                cov: cov.matrix(n, n, "x0.cov")?,
            },
            RawLaw::Categorical {
                states,
                probs,
                generator,
            } => {
                let s = probs.len();
                let st = states.matrix(s, n, "x0.states")?;
                HiddenLaw::Categorical {
                    states: (0..s).map(|i| st.row(i).transpose()).collect(),
                    probs: DVector::from_vec(probs.clone()),
                    generator: generator.matrix(s, s, "x0.generator")?,
                }
            }
        };

        let mut coef = Coefficients::zeros(&dims);
        let blocks: [(&str, &Option<RawCoefficient>, &mut CoefficientMap<f64>, (usize, usize)); 10] = [
            ("b", &file.b, &mut coef.b, (n, 1)),
            ("lambda", &file.lambda, &mut coef.lambda, (n, d)),
            ("bf", &file.bf, &mut coef.bf, (dims.ell, 1)),
            ("lambdaf", &file.lambdaf, &mut coef.lambdaf, (dims.ell, d)),
            ("a", &file.a, &mut coef.a, (dims.m, 1)),
            ("sigma", &file.sigma, &mut coef.sigma, (dims.m, d)),
            ("c", &file.c, &mut coef.c, (1, 1)),
            ("xi", &file.xi, &mut coef.xi, (1, d)),
            ("aE", &file.ae, &mut coef.ae, (dims.k, 1)),
            ("sigmaE", &file.sigmae, &mut coef.sigmae, (dims.k, d)),
        ];
        for (name, raw, slot, (rows, cols)) in blocks {
            if let Some(raw) = raw {
                *slot = raw.build(name, rows, cols, n, my)?;
            }
        }
        let spec = ModelSpec::new(dims, coef, x0, y0, horizon)?;

        let strategy = match &file.strategy {
            None => Strategy::Constant(DVector::zeros(dims.m1)),
            Some(RawStrategy {
                constant: Some(h),
                offset: None,
                gain: None,
            }) => Strategy::constant(h),
            Some(RawStrategy {
                constant: None,
                offset: Some(o),
                gain: Some(g),
            }) => Strategy::AffineFeedback {
                offset: DVector::from_vec(o.clone()),
                gain: g.with_rows(o.len(), "strategy.gain")?,
            },
            Some(_) => {
                return Err(Error::Scenario(
                    "strategy takes either `constant` or both `offset` and `gain`".into(),
                ))
            }
        };

        let raw_params = file.params.ok_or_else(|| missing("params"))?;
        let theta = overrides.theta.unwrap_or(raw_params.theta);
        let params = RiskSensitiveParams::new(theta, horizon, raw_params.r0)?;

        let raw_grid = file.grid.unwrap_or(RawGrid { dt: None, steps: None });
        let grid = match (overrides.dt.or(raw_grid.dt), raw_grid.steps) {
            (Some(dt), _) => TimeGrid::new(0.0, horizon, dt)?,
            (None, Some(steps)) => TimeGrid::with_steps(0.0, horizon, steps)?,
            (None, None) => TimeGrid::new(0.0, horizon, 1.0 / 512.0)?,
        };

        let mut mc = file.mc.unwrap_or_default();
        if let Some(s) = overrides.seed {
            mc.seed = s;
        }
        if let Some(p) = overrides.paths {
            mc.n_paths = p;
        }
        if mc.n_paths == 0 {
            return Err(Error::Scenario("mc.n_paths must be positive".into()));
        }
        let out = overrides
            .out
            .clone()
            .or(file.out)
            .unwrap_or_else(|| PathBuf::from("out"));

        Ok(Self {
            name: file.preset,
            spec,
            strategy,
            params,
            grid,
            mc,
            filter_kind: file.filter_kind,
            out,
            filter: file.filter.unwrap_or_default(),
            mze: file.mze.unwrap_or_default(),
            ks: file.ks.unwrap_or_default(),
        })
    }

    /// A registered preset as a scenario, with its default settings.
    pub fn preset(name: &str) -> Result<Self> {
        Self::build(
            ScenarioFile {
                preset: Some(name.into()),
                ..ScenarioFile::default()
            },
            &Overrides::default(),
        )
    }
}

/// Registered presets, with their file contents.
pub const PRESETS: &[(&str, &str)] = &[
    ("linear-gaussian", include_str!("../presets/linear-gaussian.toml")),
    ("wonham-2state", include_str!("../presets/wonham-2state.toml")),
    ("nagai2001", include_str!("../presets/nagai2001.toml")),
    ("bl-continuous", include_str!("../presets/bl-continuous.toml")),
    ("davis-lleo-2021", include_str!("../presets/davis-lleo-2021.toml")),
    ("general-nonlinear", include_str!("../presets/general-nonlinear.toml")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn preset_file(name: &str) -> Result<ScenarioFile> {
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::UnknownPreset(name.into()))?;
    let file = ScenarioFile::from_toml(text)?;
    if file.preset.is_some() {
        return Err(Error::Scenario(format!("preset `{name}` refers to another preset")));
    }
    Ok(file)
}

pub fn build_preset(name: &str) -> Result<ModelSpec<f64>> {
    Ok(Scenario::preset(name)?.spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate;

    #[test]
    fn every_preset_builds_and_validates() {
        for name in preset_names() {
            let s = Scenario::preset(name).unwrap();
            let report = validate(&s.spec);
            assert!(report.ok, "{name}: {:?}", report.violations);
        }
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(build_preset("nope"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn nagai_has_no_benchmark_block() {
        let s = build_preset("nagai2001").unwrap();
        assert_eq!(s.dims().k, 0);
        assert_eq!(s.dims().ell, 0);
        let x = DVector::zeros(1);
        assert!(s.coefficients().c.eval(0.0, &x, s.y0()).amax() == 0.0);
        assert!(s.coefficients().xi.eval(0.0, &x, s.y0()).amax() == 0.0);
    }

    #[test]
    fn davis_lleo_has_benchmark_and_experts() {
        let s = build_preset("davis-lleo-2021").unwrap();
        assert_eq!(s.dims().k, 1);
        assert!(s.coefficients().xi.eval(0.0, &DVector::zeros(2), s.y0()).amax() > 0.0);
    }

    #[test]
    fn overrides_replace_preset_blocks() {
        let text = r#"
            preset = "linear-gaussian"
            params = { theta = 0.25 }
            mc = { n_paths = 17, seed = 9 }
        "#;
        let over = Overrides {
            dt: Some(0.25),
            seed: Some(11),
            ..Overrides::default()
        };
        let s = Scenario::build(ScenarioFile::from_toml(text).unwrap(), &over).unwrap();
        assert_eq!(s.params.theta, 0.25);
        assert_eq!(s.params.r0, 1.0);
        assert_eq!((s.mc.n_paths, s.mc.seed), (17, 11));
        assert_eq!(s.grid.steps, 4);
        assert_eq!(s.filter_kind, Some(FilterKind::Kf));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ScenarioFile::from_toml("presett = \"x\"").is_err());
        let bad = r#"
            preset = "linear-gaussian"
            a = { family = "affine", params = { offset = [0.1], slope = [[1.0]] } }
        "#;
        assert!(ScenarioFile::from_toml(bad).is_err());
    }

    #[test]
    fn json_and_toml_agree() {
        let toml_text = preset_file("linear-gaussian").unwrap();
        let json = serde_json::to_string(&toml_text).unwrap();
        let back = ScenarioFile::from_json(&json).unwrap();
        assert_eq!(back, toml_text);
    }

    #[test]
    fn feedback_strategy_parses() {
        let text = r#"
            preset = "linear-gaussian"
            strategy = { offset = [0.2], gain = [[1.5]] }
        "#;
        let s = Scenario::build(ScenarioFile::from_toml(text).unwrap(), &Overrides::default()).unwrap();
        assert!(!s.strategy.is_constant());
        let mixed = r#"
            preset = "linear-gaussian"
            strategy = { constant = [0.2], gain = [[1.5]] }
        "#;
        assert!(Scenario::build(ScenarioFile::from_toml(mixed).unwrap(), &Overrides::default()).is_err());
    }

    #[test]
    fn ks_phi_names() {
        let s: KsSettings = toml::from_str("phi = \"one\"").unwrap();
        assert_eq!(s.phi, TestFunction::One);
        let s: KsSettings = toml::from_str("phi = \"x1\"").unwrap();
        assert_eq!(s.phi, TestFunction::Coordinate(1));
        assert!(toml::from_str::<KsSettings>("phi = \"y\"").is_err());
    }
}
