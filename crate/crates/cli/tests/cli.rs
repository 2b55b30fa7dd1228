use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn kufarev(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kufarev")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

fn chain_rows(path: &Path) -> Vec<[f64; 4]> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(3)
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            [v[0], v[1], v[2], v[3]]
        })
        .collect()
}

#[test]
fn evolve_uniform_gives_concentric_circles() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_config(dir.path(), "m.json", r#"[{"t0": 0, "t1": 1, "kind": "uniform"}]"#);
    let c = write_config(dir.path(), "c.json", &format!(r#"{{"measure": "{m}", "n": 32, "times": [0, 1]}}"#));
    let out = dir.path().join("out");
    let o = kufarev(&["evolve", "-c", &c, "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = chain_rows(&out.join("chain.csv"));
    assert_eq!(rows.len(), 64);
    for r in rows {
        let radius = (r[2] * r[2] + r[3] * r[3]).sqrt();
        let expect = (-r[0]).exp();
        assert!((radius - expect).abs() < 1e-6, "{r:?}");
    }
}

#[test]
fn evolve_example_gives_tangent_circles() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(dir.path(), "c.json", r#"{"n": 64, "times": [0.25, 0.5, 1]}"#);
    let out = dir.path().join("out");
    assert!(kufarev(&["evolve", "-c", &c, "-o", out.to_str().unwrap()]).status.success());
    for r in chain_rows(&out.join("chain.csv")) {
        let b = (-r[0]).exp();
        let (center, radius) = ((1.0 - b) / (2.0 - b), 1.0 / (2.0 - b));
        let d = ((r[2] - center).powi(2) + r[3] * r[3]).sqrt();
        assert!((d - radius).abs() < 1e-6, "{r:?}");
    }
}

#[test]
fn malformed_measure_exits_two_and_names_segment() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_config(dir.path(), "m.json", r#"[{"t0": 0, "t1": 0.5, "kind": "uniform"}, {"t0": 0.5, "t1": 1, "kind": "dirac"}]"#);
    let c = write_config(dir.path(), "c.json", &format!(r#"{{"measure": "{m}"}}"#));
    let o = kufarev(&["evolve", "-c", &c, "-o", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("segment 1"));
}

#[test]
fn bad_configs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.json", r#"{"n": 100}"#);
    assert_eq!(kufarev(&["evolve", "-c", &bad]).status.code(), Some(2));
    let junk = write_config(dir.path(), "junk.json", "{not json");
    assert_eq!(kufarev(&["energy", "-c", &junk]).status.code(), Some(2));
    let missing = write_config(dir.path(), "c.json", r#"{"measure": "/nonexistent/measure.json"}"#);
    assert_eq!(kufarev(&["verify", "-c", &missing, "1"]).status.code(), Some(2));
    assert_eq!(kufarev(&["verify", "-c", "/nonexistent/config.json"]).status.code(), Some(2));
    assert_eq!(kufarev(&["--threads", "0", "energy"]).status.code(), Some(2));
    assert_eq!(kufarev(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn duality_reruns_are_byte_identical_and_echo_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(dir.path(), "c.json", r#"{"n": 64, "m": 60, "dt": 0.004, "seed": 3, "options": {"levels": 1}}"#);
    let out = dir.path().join("out");
    let files = ["duality.json", "winding.pgm", "leaves.svg"];
    let mut runs = Vec::new();
    for threads in ["1", "3"] {
        let o = kufarev(&["--threads", threads, "duality", "-c", &c, "-o", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        runs.push(files.map(|f| fs::read(out.join(f)).unwrap()));
    }
    for (k, f) in files.iter().enumerate() {
        assert_eq!(runs[0][k], runs[1][k], "{f}");
        let text = String::from_utf8_lossy(&runs[0][k]);
        assert!(text.contains("kufarev 0.1.0"), "{f}");
        assert!(text.contains("\"seed\":3") || text.contains("\"seed\": 3"), "{f}");
    }
    let a = out;
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("duality.json")).unwrap()).unwrap();
    let ratio = report["report"]["ratio"].as_f64().unwrap();
    assert!((ratio - 16.0).abs() < 1.0, "{ratio}");
}

#[test]
fn duality_of_uniform_measure_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_config(dir.path(), "m.json", r#"[{"t0": 0, "t1": 1, "kind": "uniform"}]"#);
    let c = write_config(dir.path(), "c.json", &format!(r#"{{"measure": "{m}", "n": 32, "m": 40, "options": {{"levels": 1}}}}"#));
    let out = dir.path().join("out");
    assert!(kufarev(&["duality", "-c", &c, "-o", out.to_str().unwrap()]).status.success());
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("duality.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["d"].as_f64(), Some(0.0));
    assert!(report["report"]["ratio"].is_null());
    let pgm = fs::read(out.join("winding.pgm")).unwrap();
    let pixels = &pgm[pgm.len() - 40 * 40..];
    assert!(pixels.iter().all(|&p| p == 0 || p == 128), "zero maps to mid-grey, masked cells to black");
}

#[test]
fn verify_reports_pass_and_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    let o = kufarev(&["verify", "1", "8", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("[PASS]")).count(), 2);
    let table: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("verify.json")).unwrap()).unwrap();
    assert_eq!(table["report"].as_array().unwrap().len(), 2);

    let c = write_config(dir.path(), "coarse.json", r#"{"options": {"dt_scale": 200}}"#);
    let o = kufarev(&["verify", "1", "-c", &c, "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("[FAIL]"));
    assert_eq!(kufarev(&["verify", "13", "-o", out.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn distort_rejects_polynomial_germ_and_runs_default() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(
        dir.path(),
        "bad.json",
        r#"{"n": 64, "options": {"germ": {"kind": "polynomial", "coefficients": [[0, 0], [1, 0], [0.05, 0]]}}}"#,
    );
    let o = kufarev(&["distort", "-c", &bad, "-o", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let ok = write_config(dir.path(), "ok.json", r#"{"n": 64, "dt": 0.004, "options": {"sample_dt": 0.02}}"#);
    let out = dir.path().join("d");
    assert!(kufarev(&["distort", "-c", &ok, "-o", out.to_str().unwrap()]).status.success());
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("distortion.json")).unwrap()).unwrap();
    assert!(report["report"]["identity"]["integrated_residual"].as_f64().unwrap() < 0.02);
}

#[test]
fn reverse_writes_s_table() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(dir.path(), "c.json", r#"{"n": 64, "dt": 0.002}"#);
    let out = dir.path().join("r");
    assert!(kufarev(&["reverse", "-c", &c, "-o", out.to_str().unwrap()]).status.success());
    let text = fs::read_to_string(out.join("s_table.csv")).unwrap();
    let s: Vec<f64> = text.lines().skip(3).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(s.windows(2).all(|w| w[1] < w[0]));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("reverse.json")).unwrap()).unwrap();
    assert!(report["report"]["relative_gap"].as_f64().unwrap() < 0.03);
}

#[test]
fn remaining_commands_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let c = write_config(dir.path(), "c.json", r#"{"n": 64, "m": 60, "dt": 0.002}"#);
    for (cmd, file) in [
        ("leaves", "leaves.svg"),
        ("winding", "winding.csv"),
        ("energy", "energy.json"),
        ("isometry-check", "isometry.json"),
        ("hadamard-check", "hadamard.json"),
    ] {
        let out = dir.path().join(cmd);
        let o = kufarev(&[cmd, "-c", &c, "-o", out.to_str().unwrap()]);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(fs::read_to_string(out.join(file)).unwrap().contains("kufarev 0.1.0"), "{cmd}");
    }
}
