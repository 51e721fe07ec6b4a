use sepfilter::mze::{solve_q, GridConfig, TimeScheme};
use sepfilter::scenario::{Overrides, Scenario, ScenarioFile};

// No position and a constant benchmark drift: the source term does not
// depend on ζ, so q(T) integrates to exp(−θ·0.02) whatever the filter does.
const FLAT: &str = r#"
dims = { n = 1, m = 1 }
horizon = 1.0
x0 = { mean = [0.0], cov = [[0.01]] }
a = { family = "affine", params = { offset = [0.04], x_slope = [[0.5]] } }
sigma = { family = "constant", params = { value = [[0.0, 0.2, 0.0]] } }
c = { family = "constant", params = { value = -0.02 } }
strategy = { constant = [0.0] }
params = { theta = 0.5, r0 = 1.0 }
grid = { dt = 0.0625 }
"#;

fn flat() -> Scenario {
    Scenario::build(ScenarioFile::from_toml(FLAT).unwrap(), &Overrides::default()).unwrap()
}

#[test]
fn constant_source_gives_closed_form_criterion() {
    let sc = flat();
    for scheme in [TimeScheme::Explicit, TimeScheme::CrankNicolson] {
        let cfg = GridConfig { cells: 100, dt: 1.0 / 256.0, scheme, cloud_paths: 500, ..GridConfig::default() };
        let s = solve_q(&sc.spec, &sc.strategy, &sc.params, None, &cfg).unwrap().summary;
        assert!((s.J_bar - 1.02).abs() < 1e-9, "{scheme:?}: {}", s.J_bar);
        assert!(s.mass_control_error < 1e-12);
    }
}

#[test]
fn wonham_density_stays_on_unit_interval() {
    let sc = Scenario::preset("wonham-2state").unwrap();
    let cfg = GridConfig { cells: 100, dt: 1.0 / 256.0, scheme: TimeScheme::CrankNicolson, ..GridConfig::default() };
    let s = solve_q(&sc.spec, &sc.strategy, &sc.params, sc.filter_kind, &cfg).unwrap().summary;
    assert_eq!(s.domain, vec![(0.0, 1.0)]);
    assert!(s.mass_control_error < 1e-10);
    assert!(s.J_bar.is_finite());
}
