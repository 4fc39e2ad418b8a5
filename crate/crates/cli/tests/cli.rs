use std::path::Path;
use std::process::{Command, Output};

use statrs::function::gamma::gamma;

const BIN: &str = env!("CARGO_BIN_EXE_palmfbm");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn data_rows(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map_while(|c| c.parse().ok()).collect::<Vec<f64>>())
        .collect()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn invalid_hurst_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["sample", "--h", "1.2", "--n", "64", "--out", "p.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("(0, 1)"));
    assert!(!dir.path().join("p.csv").exists());
}

#[test]
fn single_realization_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["variance", "--h", "0.3", "--n", "256", "--realizations", "1", "--out", "v.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["regress", "--in", "nope.csv"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["plot", "--in", "nope.csv", "--out", "f.svg"]).status.code(), Some(2));
}

#[test]
fn off_grid_empirical_t_is_rejected_unless_allowed() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["spectrum", "--h", "0.3", "--mode", "empirical", "--n", "256", "--realizations", "8", "--t", "0.5"];
    let out = run(dir.path(), &[&base[..], &["--out", "e.csv"]].concat());
    assert_eq!(out.status.code(), Some(2));
    ok(dir.path(), &[&base[..], &["--allow-off-grid", "--out", "e.csv"]].concat());
}

#[test]
fn short_mixing_grid_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["mixing", "--h", "0.25", "--tmax", "10"]).status.code(), Some(2));
}

#[test]
fn mixing_reports_decay() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(dir.path(), &["mixing", "--h", "0.25", "--out", "m.csv"]);
    assert!(stdout.contains("mixing: true"));
    let rows = data_rows(&dir.path().join("m.csv"));
    assert_eq!(rows.len(), 200);
    assert!(rows.iter().all(|r| r.len() == 2));
    assert!(dir.path().join("m.manifest.json").exists());
}

#[test]
fn sample_has_n_plus_one_points_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["sample", "--h", "0.4", "--n", "1000", "--seed", "9", "--out", "p.csv"]);
    let text = std::fs::read_to_string(dir.path().join("p.csv")).unwrap();
    assert!(text.starts_with("# "));
    assert!(text.lines().any(|l| l == "# seed=9"));
    let pts: Vec<f64> = text.lines().filter(|l| !l.starts_with('#')).map(|l| l.parse().unwrap()).collect();
    assert_eq!(pts.len(), 1001);
    assert!(pts.windows(2).all(|w| w[0] <= w[1]));
    assert!(pts.contains(&0.0));
    let m = json(&dir.path().join("p.manifest.json"));
    assert_eq!(m["master_seed"], 9);
    assert_eq!(m["command"], "sample");
}

#[test]
fn odd_n_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["sample", "--h", "0.4", "--n", "1001", "--out", "p.csv"]).status.code(), Some(2));
}

#[test]
fn same_flags_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| ["sample", "--h", "0.3", "--n", "4096", "--seed", "3", "--out", out];
    ok(dir.path(), &args("a.csv"));
    ok(dir.path(), &args("b.csv"));
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
    ok(dir.path(), &["sample", "--h", "0.3", "--n", "4096", "--seed", "4", "--out", "c.csv"]);
    assert_ne!(a, std::fs::read(dir.path().join("c.csv")).unwrap());
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.cfg"), "# comment\nh=0.2\nn=100\nseed=5\n").unwrap();
    ok(dir.path(), &["sample", "--config", "run.cfg", "--n", "50", "--out", "p.csv"]);
    let text = std::fs::read_to_string(dir.path().join("p.csv")).unwrap();
    assert!(text.lines().any(|l| l == "# seed=5"));
    assert!(text.lines().any(|l| l == "# h=0.2"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 51);
    let out = run(dir.path(), &["sample", "--config", "absent.cfg", "--out", "q.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn regress_reproduces_the_variance_fit_and_plot_annotates_it() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(
        dir.path(),
        &["variance", "--h", "0.3", "--n", "4096", "--realizations", "100", "--nr", "8", "--bootstrap", "20", "--out", "v.csv"],
    );
    assert!(stdout.contains("slope: "));
    let fit = json(&dir.path().join("v.fit.json"));
    ok(dir.path(), &["regress", "--in", "v.csv", "--out", "r.json"]);
    assert_eq!(fit, json(&dir.path().join("r.json")));
    let printed: serde_json::Value = serde_json::from_str(&ok(dir.path(), &["regress", "--in", "v.csv"])).unwrap();
    assert_eq!(fit, printed);

    let rows = data_rows(&dir.path().join("v.csv"));
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r.len() == 4 && r[2] > 0.0));

    ok(dir.path(), &["plot", "--in", "v.csv", "--out", "f.svg"]);
    let svg = std::fs::read_to_string(dir.path().join("f.svg")).unwrap();
    let slope = fit["slope"].as_f64().unwrap();
    assert!(svg.contains(&format!("data-slope=\"{slope:?}\"")));
    assert!(svg.contains("slope = "));
}

#[test]
fn spectrum_modes_match_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["spectrum", "--h", "0.5", "--mode", "sum", "--tmin", "0.2", "--tmax", "3", "--nt", "15", "--out", "s.csv"]);
    let rows = data_rows(&dir.path().join("s.csv"));
    assert_eq!(rows.len(), 15);
    for r in rows {
        let (t, s) = (r[0], r[1]);
        let q = (-0.5 * t * t).exp();
        let closed = 1.0 + 2.0 * (q * t.cos() - q * q) / (1.0 - 2.0 * q * t.cos() + q * q);
        assert!((s - closed).abs() < 1e-8, "t={t}: {s} vs {closed}");
    }

    ok(dir.path(), &["spectrum", "--h", "0.5", "--mode", "continuum", "--out", "c.csv"]);
    let rows = data_rows(&dir.path().join("c.csv"));
    assert_eq!(rows.len(), 30);
    for r in rows {
        let t = r[0];
        let target = 1.0 / (1.0 + t * t / 4.0);
        assert!((r[1] - target).abs() < 1e-8, "t={t}: {} vs {target}", r[1]);
    }

    ok(dir.path(), &["spectrum", "--h", "0.25", "--mode", "asymptotic", "--out", "a.csv"]);
    let alpha = 0.5 * gamma(0.5) * (std::f64::consts::PI / 4.0).sin();
    let rows = data_rows(&dir.path().join("a.csv"));
    assert_eq!(rows.len(), 30);
    for r in rows {
        let target = alpha * r[0].sqrt();
        assert!((r[1] - target).abs() <= 1e-12 * target);
    }
}

#[test]
fn empirical_spectrum_uses_the_dual_grid() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["spectrum", "--h", "0.3", "--mode", "empirical", "--n", "512", "--realizations", "40", "--tmin", "0.5", "--tmax", "1", "--out", "e.csv"],
    );
    let text = std::fs::read_to_string(dir.path().join("e.csv")).unwrap();
    assert!(text.starts_with("# "));
    let ts: Vec<f64> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('t'))
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(!ts.is_empty());
    for t in ts {
        let k = t * 256.0 / (2.0 * std::f64::consts::PI);
        assert!((k - k.round()).abs() < 1e-9);
    }
}
