use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use tempfile::TempDir;

fn spec(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs").join(name)
}

fn run(args: &[&str], out: &Path) -> i32 {
    let status = Command::new(env!("CARGO_BIN_EXE_quasisys"))
        .args(args)
        .arg("--out")
        .arg(out)
        .stderr(Stdio::null())
        .status()
        .expect("binary runs");
    status.code().expect("exit code")
}

/// Rows of a CSV file as `(header, rows)`.
fn csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let mut lines = text.lines().map(|l| l.split(',').map(String::from).collect::<Vec<_>>());
    (lines.next().unwrap(), lines.collect())
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let (head, rows) = csv(path);
    let k = head.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name} in {head:?}"));
    rows.iter().map(|r| r[k].parse().unwrap()).collect()
}

fn report(dir: &Path) -> Vec<(String, String)> {
    fs::read_to_string(dir.join("report.txt"))
        .unwrap()
        .lines()
        .filter_map(|l| l.split_once(" = ").map(|(k, v)| (k.to_string(), v.to_string())))
        .collect()
}

fn value(dir: &Path, key: &str) -> String {
    report(dir).into_iter().find(|(k, _)| k == key).unwrap_or_else(|| panic!("no {key} in report")).1
}

#[test]
fn solve_torsion_maximum() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(run(&["solve", "--p", "2", "--plots"], tmp.path()), 0);
    let u = column(&tmp.path().join("fields/u.csv"), "u");
    let max = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!((max - 0.125).abs() < 1e-8, "{max}");
    assert!(tmp.path().join("manifest.json").exists());
}

#[test]
fn solution_plot_has_single_interior_maximum() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(run(&["solve", "--p", "3", "--mesh-n", "65", "--plots"], tmp.path()), 0);
    let svg = fs::read_to_string(tmp.path().join("plots/u.svg")).unwrap();
    let pts = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
    // screen y grows downward
    let ys: Vec<f64> = pts.split(' ').map(|p| p.split_once(',').unwrap().1.parse().unwrap()).collect();
    let k = ys.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    assert!(k > 0 && k < ys.len() - 1);
    assert!(ys[..=k].windows(2).all(|w| w[1] <= w[0]));
    assert!(ys[k..].windows(2).all(|w| w[1] >= w[0]));
    assert!(tmp.path().join("plots/residual.svg").exists());
}

#[test]
fn unit_rule_converges_in_two_steps() {
    let tmp = TempDir::new().unwrap();
    let s = spec("unit.toml");
    assert_eq!(run(&["fixpoint", "--spec", s.to_str().unwrap(), "--damping", "1", "--plots"], tmp.path()), 0);
    assert_eq!(value(tmp.path(), "status"), "converged");
    assert!(value(tmp.path(), "iterations").parse::<usize>().unwrap() <= 2);
    assert!(tmp.path().join("plots/residual.svg").exists());
}

#[test]
fn inadmissible_spec_exits_three_with_report() {
    let tmp = TempDir::new().unwrap();
    let s = spec("inadmissible.toml");
    assert_eq!(run(&["fixpoint", "--spec", s.to_str().unwrap()], tmp.path()), 3);
    let text = fs::read_to_string(tmp.path().join("report.txt")).unwrap();
    assert!(text.contains("max(gamma1,theta1) < (p1-1)/r1 = fail"), "{text}");
    assert!(!tmp.path().join("fields").exists());
}

#[test]
fn malformed_spec_exits_two() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "[domain]\ndim = 1\n").unwrap();
    assert_eq!(run(&["fixpoint", "--spec", bad.to_str().unwrap()], &tmp.path().join("o")), 2);
    assert_eq!(run(&["solve", "--p", "2", "--load", "weight:1,2"], &tmp.path().join("o2")), 2);
    assert_eq!(run(&["solve"], &tmp.path().join("o3")), 2);
}

#[test]
fn outputs_are_deterministic() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let s = spec("gradient.toml");
    let args = ["fixpoint", "--spec", s.to_str().unwrap(), "--mesh-n", "65", "--seed", "3"];
    assert_eq!(run(&args, a.path()), 0);
    assert_eq!(run(&args, b.path()), 0);
    for f in ["fields/solution.csv", "fields/rectangle.csv", "history.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn manifest_lists_inputs_and_outputs() {
    let tmp = TempDir::new().unwrap();
    let s = spec("unit.toml");
    assert_eq!(run(&["fixpoint", "--spec", s.to_str().unwrap(), "--damping", "1"], tmp.path()), 0);
    let m: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "fixpoint");
    assert_eq!(m["exit_code"], 0);
    assert_eq!(m["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    let outputs: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|o| o["path"].as_str().unwrap()).collect();
    assert!(outputs.contains(&"fields/solution.csv") && outputs.contains(&"report.txt"));
    // the embedded spec reproduces the run
    let replay = tmp.path().join("replay.toml");
    fs::write(&replay, m["spec"].as_str().unwrap()).unwrap();
    let again = tmp.path().join("again");
    assert_eq!(run(&["fixpoint", "--spec", replay.to_str().unwrap(), "--damping", "1"], &again), 0);
    assert_eq!(
        fs::read(tmp.path().join("fields/solution.csv")).unwrap(),
        fs::read(again.join("fields/solution.csv")).unwrap()
    );
}

#[test]
fn single_cell_sweep_matches_fixpoint() {
    let tmp = TempDir::new().unwrap();
    let s = spec("gradient.toml");
    let s = s.to_str().unwrap();
    let direct = tmp.path().join("direct");
    let sweep = tmp.path().join("sweep");
    assert_eq!(run(&["fixpoint", "--spec", s, "--mesh-n", "65"], &direct), 0);
    assert_eq!(run(&["sweep", "--spec", s, "--mesh-n", "65", "--grid", "gamma1=0.3"], &sweep), 0);
    for f in ["fields/solution.csv", "history.csv"] {
        assert_eq!(fs::read(direct.join(f)).unwrap(), fs::read(sweep.join("cells/000").join(f)).unwrap(), "{f}");
    }
    let (_, rows) = csv(&sweep.join("sweep.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][4], "converged");
    assert_eq!(rows[0][5], value(&direct, "iterations"));
}

#[test]
fn sweep_records_failures_in_rows() {
    let tmp = TempDir::new().unwrap();
    let s = spec("gradient.toml");
    let code = run(
        &["sweep", "--spec", s.to_str().unwrap(), "--mesh-n", "33", "--grid", "gamma1=0.1:0.5:3", "--workers", "2"],
        tmp.path(),
    );
    assert_eq!(code, 0);
    let (head, rows) = csv(&tmp.path().join("sweep.csv"));
    assert_eq!(head[..4], ["cell", "gamma1", "cdt_pass", "C"]);
    let pass: Vec<&str> = rows.iter().map(|r| r[2].as_str()).collect();
    assert_eq!(pass, ["true", "true", "false"]);
    assert_eq!(rows[2][4], "inadmissible");
    for k in 0..3 {
        assert!(tmp.path().join(format!("cells/{k:03}/manifest.json")).exists());
    }
}

#[test]
fn unknown_sweep_parameter_exits_two() {
    let tmp = TempDir::new().unwrap();
    let s = spec("gradient.toml");
    assert_eq!(run(&["sweep", "--spec", s.to_str().unwrap(), "--grid", "kappa1=1,2"], tmp.path()), 2);
}

#[test]
fn barrier_columns_are_ordered() {
    let tmp = TempDir::new().unwrap();
    let s = spec("gradient.toml");
    assert_eq!(run(&["barriers", "--spec", s.to_str().unwrap(), "--plots"], tmp.path()), 0);
    let path = tmp.path().join("fields/barriers.csv");
    let d = column(&path, "dist");
    for k in ["1", "2"] {
        let y = column(&path, &format!("y{k}"));
        let z = column(&path, &format!("z{k}"));
        let c0: f64 = value(tmp.path(), &format!("c0_{k}")).parse().unwrap();
        let c1: f64 = value(tmp.path(), &format!("c1_{k}")).parse().unwrap();
        for i in 0..d.len() {
            let tol = 1e-12 * (1.0 + y[i]);
            assert!(c0 * d[i] <= z[i] + tol && z[i] <= y[i] + tol && y[i] <= c1 * d[i] + tol, "node {i}");
        }
        let svg = fs::read_to_string(tmp.path().join(format!("plots/barriers{k}.svg"))).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 4);
    }
}

#[test]
fn validate_reports_calibration() {
    let tmp = TempDir::new().unwrap();
    let s = spec("gradient.toml");
    assert_eq!(run(&["validate", "--spec", s.to_str().unwrap(), "--mesh-n", "65", "--samples", "500"], tmp.path()), 0);
    assert_eq!(value(tmp.path(), "holdout_pass[p2_r3]"), "true");
    assert_eq!(value(tmp.path(), "envelope_pass"), "true");
    let (_, rows) = csv(&tmp.path().join("samples.csv"));
    assert_eq!(rows.len(), 60);
}

#[test]
fn solve_reads_nodal_load_from_csv() {
    let tmp = TempDir::new().unwrap();
    let first = tmp.path().join("first");
    assert_eq!(run(&["solve", "--p", "2", "--mesh-n", "33"], &first), 0);
    // -u'' = u_torsion, loaded back as a nodal field
    let load = format!("csv:{}:u", first.join("fields/u.csv").display());
    let second = tmp.path().join("second");
    assert_eq!(run(&["solve", "--p", "2", "--mesh-n", "33", "--load", &load], &second), 0);
    let max: f64 = value(&second, "u_max").parse().unwrap();
    // exact: x/24 - x^3/12 + x^4/24 at 1/2 is 5/384
    assert!((max - 5.0 / 384.0).abs() < 1e-3, "{max}");
}
