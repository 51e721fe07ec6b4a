use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const PRESETS: [&str; 6] = [
    "linear-gaussian",
    "wonham-2state",
    "nagai2001",
    "bl-continuous",
    "davis-lleo-2021",
    "general-nonlinear",
];

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn sepfilter(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sepfilter"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("SEPFILTER_THREADS", t),
        None => cmd.env_remove("SEPFILTER_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn run_ok(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> Value {
    let mut args = vec![sub, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = sepfilter(&args, None);
    assert!(
        o.status.success(),
        "{sub} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn scenario(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn equivalence_on_linear_gaussian_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(dir.path(), "lg.toml", "preset = \"linear-gaussian\"\n");
    let v = run_ok("equivalence", &cfg, &dir.path().join("out"), &["--paths", "4000"]);
    assert_eq!(v["status"], "PASS");
    let gap = v["gap"].as_f64().unwrap();
    assert!(gap.abs() <= 3.0 * v["combined_stderr"].as_f64().unwrap());
    assert!(dir.path().join("out/equivalence.json").exists());
}

#[test]
fn every_preset_classifies_strict() {
    let dir = tempfile::tempdir().unwrap();
    for name in PRESETS {
        let cfg = scenario(dir.path(), "p.toml", &format!("preset = \"{name}\"\n"));
        let v = run_ok("classify", &cfg, dir.path(), &[]);
        assert_eq!(v["verdict"], "strict", "{name}");
    }
}

#[test]
fn deterministic_criterion_is_r0_plus_drift() {
    let dir = tempfile::tempdir().unwrap();
    let v = run_ok("criterion", &data("deterministic.toml"), dir.path(), &[]);
    assert!((v["J_value"].as_f64().unwrap() - 1.02).abs() < 1e-12, "{v}");
    assert_eq!(v["stderr_J"].as_f64().unwrap(), 0.0);
    assert_eq!(v["measure_tag"], "P");
}

#[test]
fn singular_model_exits_2_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = data("singular.json");
    let o = sepfilter(&["criterion", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "validation");
    assert!(err["violations"].as_array().unwrap().iter().any(|v| v["invariant"] == "Σ^YΣ^Y' singular"));
}

#[test]
fn unknown_preset_and_bad_keys_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for body in ["preset = \"no-such-model\"\n", "preset = \"linear-gaussian\"\nthetaa = 1\n"] {
        let cfg = scenario(dir.path(), "bad.toml", body);
        let o = sepfilter(&["classify", "--config", cfg.to_str().unwrap()], None);
        assert_eq!(o.status.code(), Some(2), "{body}");
        let err: Value = serde_json::from_slice(&o.stderr).unwrap();
        assert_eq!(err["error"], "validation");
    }
}

#[test]
fn cfl_violation_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(
        dir.path(),
        "explicit.toml",
        "preset = \"linear-gaussian\"\nmze = { cells = 400, dt = 0.0009765625, scheme = \"explicit\" }\n",
    );
    let o = sepfilter(
        &["mze", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--paths", "100"],
        None,
    );
    assert_eq!(o.status.code(), Some(3));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "numerical");
}

#[test]
fn invalid_theta_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(dir.path(), "lg.toml", "preset = \"linear-gaussian\"\n");
    let o = sepfilter(&["criterion", "--config", cfg.to_str().unwrap(), "--theta", "-1.5"], None);
    assert_eq!(o.status.code(), Some(2));
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(
        dir.path(),
        "lg.toml",
        "preset = \"linear-gaussian\"\nfilter = { paths = 3, particles = 200 }\n",
    );
    let cfg = cfg.to_str().unwrap();
    let runs = [("a", Some("1")), ("b", Some("3")), ("c", None)];
    for (tag, threads) in runs {
        let out = dir.path().join(tag);
        let out = out.to_str().unwrap();
        for sub in ["simulate", "filter", "criterion", "kazamaki"] {
            let o = sepfilter(&[sub, "--config", cfg, "--out", out, "--paths", "300", "--dt", "0.0625"], threads);
            assert!(o.status.success(), "{sub}: {}", String::from_utf8_lossy(&o.stderr));
        }
    }
    for file in ["paths.csv", "simulate.json", "filter.csv", "filter_report.json", "criterion.json", "kazamaki.json"] {
        let a = read(&dir.path().join("a").join(file));
        for tag in ["b", "c"] {
            assert!(a == read(&dir.path().join(tag).join(file)), "{file} differs in run {tag}");
        }
    }
}

#[test]
fn csv_headers() {
    let dir = tempfile::tempdir().unwrap();
    let lg = scenario(dir.path(), "lg.toml", "preset = \"linear-gaussian\"\nfilter = { paths = 2, particles = 100 }\n");
    let w = scenario(dir.path(), "w.toml", "preset = \"wonham-2state\"\nfilter = { paths = 2 }\n");
    let first_line = |p: PathBuf| String::from_utf8(read(&p)).unwrap().lines().next().unwrap().to_string();

    let out = dir.path().join("lg");
    run_ok("simulate", &lg, &out, &["--paths", "2", "--dt", "0.25"]);
    assert_eq!(first_line(out.join("paths.csv")), "path_id,step,t,x_0,y_0,y_1,R,diverged");
    run_ok("filter", &lg, &out, &["--dt", "0.25"]);
    assert_eq!(first_line(out.join("filter.csv")), "path_id,step,t,m_0,vechPi_0,ess");

    let out = dir.path().join("w");
    let report = run_ok("filter", &w, &out, &["--dt", "0.25"]);
    assert!(report["oracle"].is_null());
    assert_eq!(first_line(out.join("filter.csv")), "path_id,step,t,p_0,p_1,ess");
    let v = run_ok("mze", &w, &out, &["--paths", "500"]);
    assert!(v["mass_control_error"].as_f64().unwrap() < 1e-3);
    assert_eq!(first_line(out.join("density.csv")), "t,zeta_0,q");
}

#[test]
fn filter_tracks_particle_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(
        dir.path(),
        "lg.toml",
        "preset = \"linear-gaussian\"\nfilter = { paths = 2, particles = 5000 }\n",
    );
    let v = run_ok("filter", &cfg, dir.path(), &["--dt", "0.015625"]);
    for c in v["oracle"].as_array().unwrap() {
        assert!(c["relative_rmse"].as_f64().unwrap() < 0.1, "{c}");
    }
}

#[test]
fn ks_check_runs_on_small_clusters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(
        dir.path(),
        "ks.toml",
        "preset = \"linear-gaussian\"\nks = { n_clusters = 10, paths_per_cluster = 200 }\n",
    );
    let v = run_ok("ks-check", &cfg, dir.path(), &["--dt", "0.015625"]);
    assert_eq!(v["clusters"].as_array().unwrap().len() + v["n_skipped"].as_u64().unwrap() as usize, 10);
    assert!(v["pooled_stderr"].as_f64().unwrap() > 0.0);
}
