use std::process::{Command, Output};

use serde_json::Value;

fn asyminv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asyminv"))
        .args(args)
        .env_remove("ASYMINV_THREADS")
        .output()
        .expect("run binary")
}

fn json(args: &[&str]) -> (Value, i32) {
    let mut all = args.to_vec();
    all.extend(["--json", "--no-timings"]);
    let out = asyminv(&all);
    let code = out.status.code().unwrap();
    let v = serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)));
    (v, code)
}

fn limit(report: &Value, name: &str) -> f64 {
    report["charges"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == name)
        .unwrap_or_else(|| panic!("no charge {name}"))["limit"]["value"]
        .as_f64()
        .unwrap()
}

#[test]
fn schwarzschild_mass() {
    let (r, code) = json(&["mass", "--metric", "schwarzschild", "--n", "3", "--m", "1"]);
    assert_eq!(code, 0);
    assert_eq!(r["schema_version"], 1);
    assert!((limit(&r, "mass_classical") - 1.0).abs() < 1e-3);
    assert!((limit(&r, "mass_ricci") - 1.0).abs() < 1e-2);
    assert!(r["verdicts"].as_array().unwrap().iter().all(|v| v["pass"] == true));
    assert!(r.get("timings").is_none());
}

#[test]
fn euclidean_mass_is_zero() {
    let (r, code) = json(&["mass", "--metric", "euclidean", "--n", "3"]);
    assert_eq!(code, 0);
    assert_eq!(limit(&r, "mass_classical"), 0.0);
    assert_eq!(limit(&r, "mass_ricci"), 0.0);
}

#[test]
fn kottler_ah_mass() {
    let (r, code) = json(&["ah-mass", "--metric", "kottler", "--n", "3", "--m", "1", "--kernel", "V0"]);
    assert_eq!(code, 0);
    assert_eq!(r["charges"].as_array().unwrap().len(), 2);
    assert!((limit(&r, "ah_mass_V0") - 1.0).abs() < 1e-3);
    assert!((limit(&r, "ah_ricci_0") - 1.0).abs() < 1e-2);
}

#[test]
fn verify_subcommands() {
    for args in [
        &["verify", "pohozaev", "--metric", "hyperbolic_polar", "--n", "3", "--r0", "1", "--r1", "2", "--field", "X0"][..],
        &["verify", "kernel", "--metric", "euclidean", "--n", "3", "--field", "inverted1"][..],
        &["verify", "equivalence", "--metric", "schwarzschild", "--n", "3", "--m", "1"][..],
    ] {
        let (r, code) = json(args);
        assert_eq!(code, 0, "{args:?}: {r}");
        assert!(!r["verdicts"].as_array().unwrap().is_empty());
    }
    let (r, code) = json(&["verify", "kernel", "--metric", "kottler", "--n", "3", "--m", "1", "--points", "3"]);
    assert_eq!(code, 1);
    assert!(r["verdicts"][0]["detail"].as_str().unwrap().contains("not Einstein"));
}

#[test]
fn exit_codes() {
    let out = asyminv(&["mass", "--n", "3"]);
    assert_eq!(out.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[metric]\nkind = \"euclidean\"\nn = 3\nbogus = 1\n").unwrap();
    let out = asyminv(&["mass", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));

    let expr = dir.path().join("expr.toml");
    std::fs::write(
        &expr,
        "[metric]\nkind = \"perturbation\"\nn = 3\nbase = \"euclidean\"\ncomponents = [[\"1/r\",\"0\",\"0\"],[\"0\",\"1/r\",\"0\"],[\"0\",\"0\",\"sinh(r\"]]\n",
    )
    .unwrap();
    let out = asyminv(&["mass", "--config", expr.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("components[3][3]") && err.contains("offset 7"), "{err}");

    // every radius lies inside the excised ball of a negative mass
    let (r, code) = json(&["mass", "--metric", "schwarzschild", "--n", "3", "--m", "-1", "--radii", "0.1,0.2,0.3"]);
    assert_eq!(code, 1);
    assert!(r["charges"][0]["error"].is_string());
}

#[test]
fn deterministic_and_echo_reparses() {
    let args = ["center", "--metric", "schwarzschild", "--n", "3", "--m", "1", "--center", "1,0.5,0", "--json", "--no-timings"];
    let a = asyminv(&args);
    let b = Command::new(env!("CARGO_BIN_EXE_asyminv"))
        .args(args)
        .env("ASYMINV_THREADS", "1")
        .output()
        .unwrap();
    let c = Command::new(env!("CARGO_BIN_EXE_asyminv"))
        .args(args)
        .env("ASYMINV_THREADS", "5")
        .output()
        .unwrap();
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);

    let report: Value = serde_json::from_slice(&a.stdout).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let echo = dir.path().join("echo.toml");
    std::fs::write(&echo, report["config"].as_str().unwrap()).unwrap();
    let again = asyminv(&["center", "--config", echo.to_str().unwrap(), "--json"]);
    assert_eq!(again.stdout, a.stdout);

    let threads = Command::new(env!("CARGO_BIN_EXE_asyminv"))
        .args(["mass", "--metric", "euclidean", "--n", "3"])
        .env("ASYMINV_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(threads.status.code(), Some(2));
}

#[test]
fn outputs_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = asyminv(&["sweep", "--metric", "schwarzschild", "--n", "3", "--m", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(out.join("mass_classical.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("r,raw_flux,normalized,quad_error"));
    let m: Vec<f64> = lines.map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(m.len(), 5);
    assert!(m.windows(2).all(|w| (w[1] - 1.0).abs() < (w[0] - 1.0).abs()));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["command"], "sweep");

    let o = asyminv(&["sweep", "--metric", "euclidean", "--n", "3"]);
    let text = String::from_utf8(o.stdout).unwrap();
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.starts_with('r')) {
        assert!(line.split(',').skip(1).all(|v| v.parse::<f64>().unwrap() == 0.0), "{line}");
    }
}
