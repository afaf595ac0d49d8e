use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use circmtd::correlation::cacf;
use circmtd::MtdArModel;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_circmtd");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let o = run(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn model_json(q: [i64; 2]) -> String {
    format!(
        r#"{{"p": 2, "weights": [0.3, 0.7], "signs": [{}, {}], "binding": {{"family": "wrapped_cauchy", "concentration": 0.9}}}}"#,
        q[0], q[1]
    )
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Parses a CSV with a header into (header, numeric rows).
fn table(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn simulate_is_deterministic_and_wrapped() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", &model_json([1, -1]));
    let a = ok(&["simulate", "--model", s(&m), "--n", "500", "--seed", "7"]);
    let b = ok(&["simulate", "--model", s(&m), "--n", "500", "--seed", "7"]);
    assert_eq!(a, b);
    let c = ok(&["simulate", "--model", s(&m), "--n", "500", "--seed", "8"]);
    assert_ne!(a, c);
    let (header, rows) = table(&a);
    assert_eq!(header, ["theta"]);
    assert_eq!(rows.len(), 500);
    assert!(rows.iter().all(|r| (-PI..PI).contains(&r[0])));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", &model_json([1, 1]));
    assert_eq!(run(&["simulate", "--model", s(&m), "--n", "0"]).status.code(), Some(2));
    assert_eq!(run(&["acf", "--model", "/nonexistent/model.json"]).status.code(), Some(4));
    assert_eq!(run(&["acf"]).status.code(), Some(2));
    let bad = write(&dir, "bad.json", r#"{"p": 2, "weights": [0.5, 0.6], "signs": [1, 1], "binding": {"family": "wrapped_cauchy", "concentration": 0.5}}"#);
    assert_eq!(run(&["acf", "--model", s(&bad)]).status.code(), Some(2));
    let short = write(&dir, "short.csv", "0.1\n0.2\n0.3\n");
    assert_eq!(run(&["fit", "--series", s(&short), "--p", "2"]).status.code(), Some(2));
}

#[test]
fn acf_matches_library() {
    let dir = TempDir::new().unwrap();
    let text = model_json([-1, 1]);
    let m = write(&dir, "m.json", &text);
    let (header, rows) = table(&ok(&["acf", "--model", s(&m), "--max-lag", "15"]));
    assert_eq!(header, ["lag", "value"]);
    let lib = cacf(&MtdArModel::from_json(&text).unwrap(), 15).unwrap();
    assert_eq!(rows.len(), 16);
    for (r, v) in rows.iter().zip(&lib) {
        assert!((r[1] - v).abs() < 1e-15);
    }
    let (gh, g) = table(&ok(&["acf", "--model", s(&m), "--max-lag", "3", "--gamma"]));
    assert_eq!(gh, ["lag", "g11", "g12", "g21", "g22"]);
    assert!((g[0][1] - 0.5).abs() < 1e-15 && (g[0][4] - 0.5).abs() < 1e-15);
}

#[test]
fn pacf_vanishes_beyond_order() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", &model_json([1, 1]));
    let (header, rows) = table(&ok(&["pacf", "--model", s(&m), "--max-lag", "8"]));
    assert_eq!(header, ["lag", "value"]);
    assert_eq!(rows[0][0], 1.0);
    assert!(rows[1][1].abs() > 0.01);
    assert!(rows[2..].iter().all(|r| r[1].abs() < 1e-10));
}

#[test]
fn spectra_integrate_to_a_quarter() {
    let dir = TempDir::new().unwrap();
    for (i, q) in [[1, 1], [-1, 1], [1, -1], [-1, -1]].into_iter().enumerate() {
        let m = write(&dir, &format!("m{i}.json"), &model_json(q));
        let svg = dir.path().join(format!("f{i}.svg"));
        let (header, rows) = table(&ok(&["spectrum", "--model", s(&m), "--grid", "4096", "--svg", s(&svg)]));
        assert_eq!(header, ["omega", "density", "merged_poles"]);
        // periodic integrand: the rectangle rule on the uniform grid is the trapezoid rule
        let h = 2.0 * PI / rows.len() as f64;
        let total: f64 = rows.iter().map(|r| r[1]).sum::<f64>() * h;
        assert!((total - 0.25).abs() < 1e-6, "{q:?}: {total}");
        assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
    }
}

#[test]
fn spectrum_methods_agree() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", &model_json([1, -1]));
    let (_, a) = table(&ok(&["spectrum", "--model", s(&m), "--grid", "64"]));
    let (_, b) = table(&ok(&["spectrum", "--model", s(&m), "--grid", "64", "--method", "convolution"]));
    for (x, y) in a.iter().zip(&b) {
        assert!((x[1] - y[1]).abs() < 1e-6 * y[1]);
    }
}

#[test]
fn degrees_equal_radians() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", &model_json([1, 1]));
    let rad = ok(&["simulate", "--model", s(&m), "--n", "400", "--seed", "3"]);
    let (_, rows) = table(&rad);
    let deg: String = rows.iter().map(|r| format!("{}\n", r[0].to_degrees())).collect();
    let rp = write(&dir, "rad.csv", &rad);
    let dp = write(&dir, "deg.csv", &deg);
    let (_, a) = table(&ok(&["acf", "--series", s(&rp), "--max-lag", "5"]));
    let (_, b) = table(&ok(&["acf", "--series", s(&dp), "--max-lag", "5", "--unit", "deg"]));
    for (x, y) in a.iter().zip(&b) {
        assert!((x[1] - y[1]).abs() < 1e-12);
    }
}

#[test]
fn order_selection_table() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", &model_json([1, 1]));
    let sim = write(&dir, "x.csv", &ok(&["simulate", "--model", s(&m), "--n", "310", "--seed", "4"]));
    let out = ok(&["fit", "--series", s(&sim), "--p-max", "7"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let t = v["table"].as_array().unwrap();
    assert_eq!(t.len(), 7);
    let sel = v["selected"].as_u64().unwrap() as usize;
    let best = t
        .iter()
        .map(|r| r["bic"].as_f64().unwrap())
        .fold(f64::INFINITY, f64::min);
    assert_eq!(t[sel - 1]["bic"].as_f64().unwrap(), best);
}

#[test]
fn simulate_then_fit_recovers_parameters() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", &model_json([1, -1]));
    let sim = write(&dir, "x.csv", &ok(&["simulate", "--model", s(&m), "--n", "5000", "--seed", "11"]));
    let fit: serde_json::Value = serde_json::from_str(&ok(&["fit", "--series", s(&sim), "--p", "2"])).unwrap();
    assert_eq!(fit["signs"], serde_json::json!([1, -1]));
    let w = fit["weights"].as_array().unwrap();
    assert!((w[0].as_f64().unwrap() - 0.3).abs() < 0.05);
    assert!((fit["params"]["concentration"].as_f64().unwrap() - 0.9).abs() < 0.02);
    let fixed: serde_json::Value =
        serde_json::from_str(&ok(&["fit", "--series", s(&sim), "--p", "2", "--signs", "1,-1"])).unwrap();
    assert_eq!(fixed["loglik"], fit["loglik"]);
}

#[test]
fn study_writes_tables_and_manifest() {
    let dir = TempDir::new().unwrap();
    let cfg = format!(
        r#"{{"kind": "estimation", "truth": {}, "sample_sizes": [100, 200], "replications": 3, "seed": 5,
            "q_grid": [[1, 1], [1, -1]]}}"#,
        model_json([1, 1])
    );
    let c = write(&dir, "est.json", &cfg);
    let out = dir.path().join("est");
    ok(&["study", "--config", s(&c), "--out", s(&out)]);
    let text = std::fs::read_to_string(out.join("estimation.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n,q,fit_family,replications,a1_mean,a1_rmse,rho_mean,rho_rmse,a1_coverage,nonconverged,failed"
    );
    assert_eq!(lines.count(), 4);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["cells"], 4);
    assert_eq!(manifest["seed"], 5);

    let cfg = format!(
        r#"{{"kind": "selection", "truth": {}, "sample_sizes": [60], "replications": 2, "p_max": 3}}"#,
        model_json([1, 1])
    );
    let c = write(&dir, "sel.json", &cfg);
    let out = dir.path().join("sel");
    ok(&["study", "--config", s(&c), "--out", s(&out)]);
    let text = std::fs::read_to_string(out.join("selection.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,q,criterion,replications,failed,p1,p2,p3");
    assert_eq!(lines.len(), 3);

    let bad = write(&dir, "bad.json", r#"{"kind": "estimation", "bogus": 1}"#);
    assert_eq!(run(&["study", "--config", s(&bad), "--out", s(&out)]).status.code(), Some(2));
}
