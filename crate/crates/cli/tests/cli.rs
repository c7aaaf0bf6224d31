use std::path::Path;
use std::process::{Command, Output};

fn spinlab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinlab"))
        .args(args)
        .current_dir(dir)
        .env_remove("SPINLAB_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn summary(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const HOPPING_JUMP: &str = r#"{"alpha": [0, 0], "beta": 0, "gamma": 0, "jumps": [[1, 0, 0, 0, 0, 0, 0, 0, 0, 0]]}"#;

#[test]
fn noncrossing_count_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = spinlab(&["cumulants", "--n", "4", "--kind", "noncrossing", "--count-only"], dir.path());
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "14");
    let out = spinlab(&["cumulants", "--n", "5", "--kind", "classical", "--count-only"], dir.path());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "52");
}

#[test]
fn bound_reproduces_lower_bound() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "model.json", HOPPING_JUMP);
    let cfg = write(dir.path(), "exp.toml", "model = \"model.json\"\nmu = 0.0\n");
    let out = spinlab(&["bound", "--config", &cfg, "--out", "res"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&dir.path().join("res/bound.json"));
    let l = s["summary"]["report"]["L_lower"].as_f64().unwrap();
    assert!((l - 3.4945e-3).abs() < 1e-7, "{l}");
    assert_eq!(s["meta"]["config_hash"].as_str().unwrap().len(), 64);
    assert!(s["meta"]["tolerances"]["j_trace_vs_closed_form"].is_number());
}

#[test]
fn validate_reports_zero_residual_for_equal_diagonal_parts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "exp.json",
        r#"{"model": {"alpha": [1, 0], "beta": 0.2, "gamma": 0.1,
            "jumps": [[0.5, 0.1, 0.3, 0, 0.4, -0.2, 0.4, -0.2, 0.1, 0]]}}"#,
    );
    let out = spinlab(&["validate", "--config", &cfg, "--out", "."], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&dir.path().join("validate.json"));
    assert_eq!(s["summary"]["report"]["condition_residual"].as_f64(), Some(0.0));
}

#[test]
fn validation_failure_exits_2_after_writing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "exp.toml",
        "[model]\nalpha = [1.0, 0.0]\nbeta = 0.0\ngamma = 0.0\njumps = [[1.0, 0, 0, 0, 0.3, 0, 0, 0, 0, 0]]\n",
    );
    let out = spinlab(&["validate", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(dir.path().join("validate.csv").exists());
}

#[test]
fn unknown_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "exp.toml", "[window]\nsize = 4\n");
    let out = spinlab(&["bound", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("size"));
    let cfg = write(dir.path(), "bad.toml", "[ray]\ndt = -1.0\n");
    let out = spinlab(&["ray-average", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ray.dt"));
}

#[test]
fn oversized_window_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "exp.toml", "[window]\nsites = 20\n");
    let out = spinlab(&["lr-cone", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn identical_configs_give_identical_bytes_and_env_dir_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "exp.toml",
        "model = \"random\"\nseed = 11\n[window]\nsites = 6\n[ray]\nv = 0.5\nt_max = 1.0\ndt = 0.1\n",
    );
    for sub in ["a", "b"] {
        let out = spinlab(&["ray-average", "--config", &cfg, "--out", sub], dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["ray-average.csv", "ray-average.json"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    let out = Command::new(env!("CARGO_BIN_EXE_spinlab"))
        .args(["stationarity", "--seed", "3"])
        .env("SPINLAB_OUT_DIR", dir.path().join("env"))
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("env/stationarity.csv").exists());
}

#[test]
fn threads_do_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "exp.toml", "[window]\nsites = 7\n[lr]\ntimes = [0.1, 0.2, 0.3]\n");
    for (sub, threads) in [("one", "1"), ("two", "2")] {
        let out = spinlab(&["lr-cone", "--config", &cfg, "--out", sub, "--threads", threads], dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(dir.path().join("one/lr-cone.csv")).unwrap();
    let b = std::fs::read(dir.path().join("two/lr-cone.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn onsager_respects_chaotic_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "exp.toml",
        "mu = 0.3\n[model]\nalpha = [0.3, 0.1]\nbeta = 0.2\ngamma = 0.1\njumps = [[0.4, 0, 0.15, 0, 0.1, 0, 0.1, 0, 0.05, 0]]\n\
         [onsager]\nring = 6\nhorizons = [0.2]\nnodes = 6\n",
    );
    let out = spinlab(&["onsager", "--config", &cfg, "--chaotic", "on"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&dir.path().join("onsager.json"));
    assert_eq!(s["meta"]["config"]["onsager"]["chaotic"], true);
    // On a 6-site ring the decomposition closes up to the antipodal shell.
    let row = &s["summary"]["rows"][0];
    assert!(row["gap"].as_f64().unwrap() <= row["tail"].as_f64().unwrap());
}
