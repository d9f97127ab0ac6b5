mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::{free_u, well_u};
use plasma_core::BoundaryData;
use serde_json::Value;

fn plasma(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plasma"))
        .args(args)
        .env("PLASMA_THREADS", threads)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn forward_zero_potential_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let r = plasma(&["forward", "--potential", "zero", "-o", s(&out)], "0");
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let data = BoundaryData::from_csv(&fs::read_to_string(out.join("data.csv")).unwrap()).unwrap();
    assert_eq!(data.grid.len(), 4096);
    for (i, &k) in data.grid.values().iter().enumerate() {
        assert!((data.u_minus[i] - free_u(k)).norm() < 1e-12);
        assert!((data.u_plus[i] - free_u(k)).norm() < 1e-12);
    }
    let report = json(&out.join("forward.json"));
    assert_eq!(report["provenance"]["potential_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(report["config"]["numerics"]["tolerances"]["unitarity"], 1e-8);
    assert!(!out.join(".plasma.lock").exists());
}

#[test]
fn forward_square_well_spot_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("w");
    let r = plasma(&["forward", "--potential", "square_well:q0=1", "--n-k", "1024", "-o", s(&out)], "0");
    assert_eq!(code(&r), 0);
    let data = BoundaryData::from_csv(&fs::read_to_string(out.join("data.csv")).unwrap()).unwrap();
    for i in [0, 100, 511, 1023] {
        let (um, up) = well_u(1.0, data.grid.values()[i]);
        assert!((data.u_minus[i] - um).norm() < 1e-8 && (data.u_plus[i] - up).norm() < 1e-8);
    }
}

#[test]
fn config_errors_leave_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let r = plasma(&["forward", "--potential", "csv:/definitely/missing.csv", "-o", s(&out)], "0");
    assert_eq!(code(&r), 2);
    assert!(!out.exists());
    assert!(String::from_utf8_lossy(&r.stderr).contains("missing.csv"));

    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"potential": {"family": "zero"}, "k_grid": {"k_min": 0.05, "kmax": 10}}"#).unwrap();
    let r = plasma(&["forward", "--config", s(&cfg), "-o", s(&out)], "0");
    assert_eq!(code(&r), 2);

    let r = plasma(&["forward", "--potential", "zero", "--k-min", "0.01", "-o", s(&out)], "0");
    assert_eq!(code(&r), 2);
    let r = plasma(&["--potential", "zero", "-o", s(&out)], "0");
    assert_eq!(code(&r), 2, "no stage");
    assert!(!out.exists());
}

#[test]
fn flags_override_the_config_and_stage_comes_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = dir.path().join("c.json");
    fs::write(
        &cfg,
        format!(
            r#"{{"stage": "forward", "potential": {{"family": "bump", "c": 2.0}}, "n_x": 401,
                "k_grid": {{"k_min": 0.05, "k_max": 20.0, "n_k": 300}}, "output_dir": "{}"}}"#,
            s(&out)
        ),
    )
    .unwrap();
    let r = plasma(&["--config", s(&cfg), "--n-k", "200"], "0");
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let report = json(&out.join("forward.json"));
    assert_eq!(report["config"]["k_grid"]["n_k"], 200);
    assert_eq!(report["config"]["n_x"], 401);
    assert_eq!(report["config"]["potential"]["family"], "bump");
}

#[test]
fn locked_directory_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join(".plasma.lock"), "1").unwrap();
    let r = plasma(&["forward", "--potential", "zero", "--n-k", "64", "-o", s(dir.path())], "0");
    assert_eq!(code(&r), 2);
    assert!(!dir.path().join("data.csv").exists());
}

#[test]
fn invert_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let run = |pot: &str, name: &str| {
        let fwd = dir.path().join(format!("{name}-fwd"));
        assert_eq!(code(&plasma(&["forward", "--potential", pot, "-o", s(&fwd)], "0")), 0);
        let inv = dir.path().join(format!("{name}-inv"));
        let data = fwd.join("data.csv");
        let r = plasma(&["invert", "--data", s(&data), "--potential", pot, "-o", s(&inv)], "0");
        (r, inv)
    };

    let (r, inv) = run("zero", "zero");
    assert_eq!(code(&r), 0);
    let report = json(&inv.join("invert.json"));
    assert!(report["accuracy"]["q_max_abs"].as_f64().unwrap() <= 1e-6);
    for f in ["a.csv", "b.csv", "r.csv", "q.csv"] {
        assert!(inv.join(f).exists(), "{f}");
    }

    let (r, inv) = run("square_well:q0=1", "w1");
    assert_eq!(code(&r), 0);
    let report = json(&inv.join("invert.json"));
    assert!(report["accuracy"]["l2_rel_error"].as_f64().unwrap() <= 5e-2);
    assert_eq!(report["ind_m"], 0);
    assert_eq!(report["ind_a"], 0);
    assert!(report["riemann_residual"].as_f64().unwrap() <= 1e-6);

    let (r, inv) = run("square_well:q0=-2", "w2");
    assert_eq!(code(&r), 4);
    assert!(String::from_utf8_lossy(&r.stderr).contains("ind_m"));
    let report = json(&inv.join("invert.json"));
    assert_eq!(report["status"], "refused");
    assert!(report["ind_m"].as_i64().unwrap() != 0);
    assert!(!inv.join("q.csv").exists());
}

#[test]
fn invert_rejects_a_grid_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let fwd = dir.path().join("f");
    assert_eq!(code(&plasma(&["forward", "--potential", "zero", "--n-k", "512", "-o", s(&fwd)], "0")), 0);
    let inv = dir.path().join("i");
    let r = plasma(&["invert", "--data", s(&fwd.join("data.csv")), "-o", s(&inv)], "0");
    assert_eq!(code(&r), 2);
    assert!(!inv.exists());
}

#[test]
fn residual_failures_exit_5() {
    let dir = tempfile::tempdir().unwrap();
    let fwd = dir.path().join("f");
    assert_eq!(code(&plasma(&["forward", "--potential", "bump:c=2", "-o", s(&fwd)], "0")), 0);
    let cfg = dir.path().join("tight.json");
    fs::write(&cfg, r#"{"numerics": {"tolerances": {"riemann_residual": 1e-16}}}"#).unwrap();
    let inv = dir.path().join("i");
    let r = plasma(&["invert", "--config", s(&cfg), "--data", s(&fwd.join("data.csv")), "-o", s(&inv)], "0");
    assert_eq!(code(&r), 5, "{}", String::from_utf8_lossy(&r.stderr));
}

#[test]
fn roundtrip_and_diagnose() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rt");
    let r = plasma(&["roundtrip", "--potential", "bump:c=2", "-o", s(&out)], "0");
    assert_eq!(code(&r), 0);
    let report = json(&out.join("roundtrip.json"));
    assert!(report["accuracy"]["l2_rel_error"].as_f64().unwrap() <= 5e-2);
    assert!(report["forward"]["unitarity_defect"].as_f64().unwrap() < 1e-8);

    let out = dir.path().join("rt0");
    assert_eq!(code(&plasma(&["roundtrip", "--potential", "zero", "-o", s(&out)], "0")), 0);
    let report = json(&out.join("roundtrip.json"));
    assert!(report["accuracy"]["l2_rel_error"].as_f64().unwrap() < 1e-6);
    assert!(report["accuracy"]["linf_error"].as_f64().unwrap() < 1e-6);

    let out = dir.path().join("dg");
    let r = plasma(&["diagnose", "--potential", "square_well:q0=-2", "-o", s(&out)], "0");
    assert_eq!(code(&r), 0);
    let report = json(&out.join("diagnose.json"));
    let sp = &report["spectrum"];
    assert_eq!(sp["j"], 1);
    assert_eq!(sp["ind_a"], 1);
    assert!(sp["ind_m"].as_i64().unwrap() >= 0);
    assert_eq!(report["tolerances"]["eps_spec"], 1e-8);

    let out = dir.path().join("dg1");
    assert_eq!(code(&plasma(&["diagnose", "--potential", "square_well:q0=1", "-o", s(&out)], "0")), 0);
    let sp = &json(&out.join("diagnose.json"))["spectrum"];
    for key in ["j", "ind_a", "ind_f", "ind_g", "ind_m"] {
        assert_eq!(sp[key], 0, "{key}");
    }
}

#[test]
fn outputs_are_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let fwd = dir.path().join("f");
    let inv = dir.path().join("i");
    let mut snapshots = Vec::new();
    for threads in ["1", "4", "1"] {
        assert_eq!(code(&plasma(&["forward", "--potential", "bump:c=2", "-o", s(&fwd)], threads)), 0);
        let data = fwd.join("data.csv");
        let r = plasma(&["invert", "--data", s(&data), "--potential", "bump:c=2", "-o", s(&inv)], threads);
        assert_eq!(code(&r), 0);
        let mut files = Vec::new();
        for d in [&fwd, &inv] {
            let mut names: Vec<_> = fs::read_dir(d).unwrap().map(|e| e.unwrap().path()).collect();
            names.sort();
            for p in names {
                files.push((p.clone(), fs::read(&p).unwrap()));
            }
        }
        snapshots.push(files);
    }
    assert_eq!(snapshots[0], snapshots[1]);
    assert_eq!(snapshots[0], snapshots[2]);
}

#[test]
fn help_documents_precedence() {
    let r = plasma(&["--help"], "0");
    let text = String::from_utf8_lossy(&r.stdout);
    assert!(text.contains("precedence") && text.contains("PLASMA_THREADS"));
}
