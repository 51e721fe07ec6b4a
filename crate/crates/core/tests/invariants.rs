use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use sepfilter::criteria::{
    criterion_from_returns, equivalence_from_batch, Experiment, Filtration, RiskSensitiveParams,
};
use sepfilter::filter::{wonham_step, KalmanSchedule, SimplexFilterState, systematic_resample};
use sepfilter::linalg::min_eigenvalue;
use sepfilter::model::LinearGaussianModel;
use sepfilter::moments::GaussHermite;
use sepfilter::rng::stream_rng;
use sepfilter::scenario::{Overrides, Scenario};
use sepfilter::sde::{MeasureTag, TimeGrid};

fn theta() -> impl Strategy<Value = f64> {
    prop_oneof![-0.95..-0.05f64, 0.05..5.0f64]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn j_is_minus_log_i_over_theta(theta in theta(), r in prop::collection::vec(-0.5..0.5f64, 1..50)) {
        let params = RiskSensitiveParams::new(theta, 1.0, 1.0).unwrap();
        let e = criterion_from_returns(&params, &r, 0, MeasureTag::P, Filtration::Original).unwrap();
        prop_assert!((e.J_value + e.I_value.ln() / theta).abs() <= 1e-12 * (1.0 + e.J_value.abs()));
    }

    #[test]
    fn shifting_returns_shifts_j(theta in theta(), r in prop::collection::vec(-0.5..0.5f64, 1..50), d in 0.0..0.3f64) {
        let params = RiskSensitiveParams::new(theta, 1.0, 1.0).unwrap();
        let j = |r: &[f64]| criterion_from_returns(&params, r, 0, MeasureTag::P, Filtration::Original).unwrap().J_value;
        let up: Vec<f64> = r.iter().map(|v| v + d).collect();
        prop_assert!((j(&up) - j(&r) - d).abs() <= 1e-10);
    }

    #[test]
    fn grids_accept_only_dividing_steps(steps in 1usize..2000, horizon in 0.1..10.0f64) {
        let g = TimeGrid::new(0.0, horizon, horizon / steps as f64).unwrap();
        prop_assert_eq!(g.steps, steps);
        prop_assert!((g.time(g.steps) - horizon).abs() <= 1e-9 * horizon);
        prop_assert!(TimeGrid::new(0.0, horizon, horizon / (steps as f64 + 0.5)).is_err());
    }

    #[test]
    fn wonham_stays_on_simplex(
        q01 in 0.0..5.0f64, q10 in 0.0..5.0f64,
        f0 in -2.0..2.0f64, f1 in -2.0..2.0f64,
        p in 0.0..1.0f64, sigma in 0.05..1.0f64,
        dys in prop::collection::vec(-0.5..0.5f64, 1..40),
    ) {
        let q = DMatrix::from_row_slice(2, 2, &[-q01, q01, q10, -q10]);
        let f = DVector::from_vec(vec![f0, f1]);
        let mut s = SimplexFilterState { p: DVector::from_vec(vec![1.0 - p, p]) };
        for dy in dys {
            s = wonham_step(&q, &f, sigma, &s, dy, 0.01).unwrap();
            prop_assert!(s.p.iter().all(|v| *v >= 0.0));
            prop_assert!((s.p.sum() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn riccati_keeps_covariance_psd(
        b in -2.0..1.0f64, lam in 0.0..1.0f64, a in -3.0..3.0f64, s in 0.1..1.0f64, p0 in 0.0..2.0f64,
    ) {
        let model = LinearGaussianModel {
            b0: DVector::zeros(1),
            b: DMatrix::from_element(1, 1, b),
            lambda: DMatrix::from_element(1, 1, lam),
            a0: DVector::zeros(1),
            a: DMatrix::from_element(1, 1, a),
            sigma_y: DMatrix::from_element(1, 1, s),
            m0: DVector::zeros(1),
            p0: DMatrix::from_element(1, 1, p0),
        };
        let sched = KalmanSchedule::new(&model, 1.0 / 256.0, 256).unwrap();
        for pi in &sched.pi {
            prop_assert!(min_eigenvalue(pi) >= 0.0);
        }
    }

    #[test]
    fn systematic_resampling_is_balanced(w in prop::collection::vec(0.01..1.0f64, 2..60), seed in any::<u64>()) {
        let total: f64 = w.iter().sum();
        let w: Vec<f64> = w.iter().map(|v| v / total).collect();
        let idx = systematic_resample(&w, &mut stream_rng(seed, 0));
        let n = w.len();
        prop_assert_eq!(idx.len(), n);
        prop_assert!(idx.windows(2).all(|p| p[0] <= p[1]));
        for (j, wj) in w.iter().enumerate() {
            let count = idx.iter().filter(|&&i| i == j).count() as f64;
            prop_assert!((count - n as f64 * wj).abs() < 1.0 + 1e-9);
        }
    }

    #[test]
    fn gauss_hermite_matches_gaussian_mgf(eta in -2.0..2.0f64, m in -1.0..1.0f64, p in 0.0..1.0f64) {
        let gh = GaussHermite::<f64>::new(20).unwrap();
        let e: f64 = gh.nodes.iter().zip(&gh.weights).map(|(z, w)| w * (eta * (m + p.sqrt() * z)).exp()).sum();
        let exact = (eta * m + 0.5 * eta * eta * p).exp();
        prop_assert!((e - exact).abs() <= 1e-12 * exact);
    }
}

fn small_experiment(sc: &Scenario, seed: u64) -> Experiment<'_> {
    Experiment {
        spec: &sc.spec,
        strategy: &sc.strategy,
        params: sc.params,
        grid: TimeGrid::with_steps(0.0, sc.grid.horizon, 32).unwrap(),
        seed,
        n_paths: 64,
        filter_kind: sc.filter_kind,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn separated_return_equals_original_pathwise(seed in any::<u64>(), preset in prop::sample::select(vec!["linear-gaussian", "wonham-2state"])) {
        let sc = Scenario::preset(preset).unwrap();
        let batch = small_experiment(&sc, seed).batch(MeasureTag::P).unwrap();
        let r = equivalence_from_batch(&batch).unwrap();
        prop_assert!(r.max_pathwise_gap <= 1e-10, "{}", r.max_pathwise_gap);
    }

    #[test]
    fn batches_do_not_depend_on_thread_count(seed in any::<u64>()) {
        let sc = Scenario::build(
            sepfilter::scenario::preset_file("linear-gaussian").unwrap(),
            &Overrides::default(),
        ).unwrap();
        let ex = small_experiment(&sc, seed);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
                .install(|| ex.batch(MeasureTag::Ph).unwrap().ledgers)
        };
        prop_assert_eq!(run(1), run(4));
    }
}
