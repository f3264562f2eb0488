use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bvlift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bvlift")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn fixture(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const LINEAR: &str = r#"{
  "space": {"labels": ["a", "b"], "coords": [[0], [1]]},
  "generator": {"kind": "linear", "mu0": [1, 0], "mu1": [0, 1]}
}"#;

#[test]
fn triangle_violation_names_the_axiom() {
    let dir = TempDir::new().unwrap();
    let f = fixture(&dir, "bad.json", r#"{"labels": ["a", "b", "c"], "dist": [[0, 1, 5], [1, 0, 1], [5, 1, 0]]}"#);
    let o = bvlift(&["space", "validate", s(&f), "--json"]);
    assert_eq!(code(&o), 1);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["valid"], false);
    assert_eq!(v["violations"][0]["axiom"], "triangle");
}

#[test]
fn valid_space_passes() {
    let dir = TempDir::new().unwrap();
    let f = fixture(&dir, "ok.json", r#"{"labels": ["a", "b", "c"], "coords": [[0, 0], [3, 0], [0, 4]]}"#);
    assert_eq!(code(&bvlift(&["space", "validate", s(&f)])), 0);
}

#[test]
fn malformed_inputs_exit_two() {
    let dir = TempDir::new().unwrap();
    let f = fixture(&dir, "ragged.json", r#"{"labels": ["a", "b"], "dist": [[0, 1], [1]]}"#);
    assert_eq!(code(&bvlift(&["space", "validate", s(&f)])), 2);
    let f = fixture(&dir, "mass.json", r#"{"space": {"labels": ["a", "b"], "coords": [[0], [1]]}, "mu": [0.5, 0.4], "nu": [0, 1]}"#);
    assert_eq!(code(&bvlift(&["w1", "dist", s(&f)])), 2);
    assert_eq!(code(&bvlift(&["space", "validate", "/nonexistent.json"])), 2);
    assert_eq!(code(&bvlift(&["example", "run", "nope"])), 2);
    assert_eq!(code(&bvlift(&["example", "run", "cantor_cs", "--eps", "0.1"])), 2);
    assert_eq!(code(&bvlift(&["example", "run", "periodic_sigma", "--sigma", "uniform", "--grid", "5"])), 2);
}

#[test]
fn w1_on_the_line() {
    let dir = TempDir::new().unwrap();
    let f = fixture(
        &dir,
        "w1.json",
        r#"{"space": {"labels": ["a", "b", "c"], "coords": [[0], [1], [3]]}, "mu": [0.5, 0.5, 0], "nu": [0, 0.5, 0.5]}"#,
    );
    let o = bvlift(&["w1", "dist", s(&f), "--json"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["distance"].as_f64().unwrap() - 1.5).abs() < 1e-12);
    assert!(v["duality_gap"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn perturbed_lift_fails_with_witness() {
    let dir = TempDir::new().unwrap();
    let curve = fixture(&dir, "lin.json", LINEAR);
    let o = bvlift(&["lift", "build", s(&curve), "--level", "3", "--perturb-link", "4"]);
    assert_eq!(code(&o), 0);
    let bad = fixture(&dir, "bad_lift.json", &stdout(&o));
    let o = bvlift(&["lift", "verify", s(&curve), "--level", "3", "--lift", s(&bad), "--optimal", "--json"]);
    assert_eq!(code(&o), 1);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["certified"], true);
    assert_eq!(v["inequality_holds"], true);
    let w = &v["witness"];
    assert_eq!((w["a"].as_f64().unwrap(), w["b"].as_f64().unwrap()), (0.5, 0.625));
    assert!(w["slack"].as_f64().unwrap() >= 1e-3);

    // without --optimal only the inequality is checked, and it holds
    let o = bvlift(&["lift", "verify", s(&curve), "--level", "3", "--lift", s(&bad)]);
    assert_eq!(code(&o), 0);
}

#[test]
fn built_lift_round_trip() {
    let dir = TempDir::new().unwrap();
    let curve = fixture(&dir, "lin.json", LINEAR);
    let out = dir.path().join("out");
    let o = bvlift(&["lift", "build", s(&curve), "--level", "4", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let lift = out.join("lift.json");
    assert!(out.join("lift.csv").exists());
    for cmd in [
        vec!["lift", "verify", s(&curve), "--level", "4", "--lift", s(&lift), "--optimal"],
        vec!["current", "verify", s(&curve), "--level", "4", "--lift", s(&lift)],
        vec!["curve", "geodesic", s(&curve), "--level", "4", "--lift", s(&lift)],
    ] {
        let o = bvlift(&cmd);
        assert_eq!(code(&o), 0, "{cmd:?}: {}", stdout(&o));
    }
    // the same lift does not push forward to the reversed curve
    let reversed = fixture(&dir, "rev.json", &LINEAR.replace("[1, 0], \"mu1\": [0, 1]", "[0, 1], \"mu1\": [1, 0]"));
    let o = bvlift(&["current", "verify", s(&reversed), "--level", "4", "--lift", s(&lift)]);
    assert_eq!(code(&o), 2);
    let o = bvlift(&["lift", "verify", s(&reversed), "--level", "4", "--lift", s(&lift), "--json"]);
    assert_eq!(code(&o), 1);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["certified"], false);
}

#[test]
fn current_extract_writes_rates() {
    let dir = TempDir::new().unwrap();
    let curve = fixture(&dir, "lin.json", LINEAR);
    let lift = fixture(&dir, "lift.json", &stdout(&bvlift(&["lift", "build", s(&curve), "--level", "2"])));
    let out = dir.path().join("field");
    let o = bvlift(&["current", "extract", s(&curve), "--level", "2", "--lift", s(&lift), "--json", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    // v^0(1) = 1 / (1 - t)
    assert_eq!(v["steps"][2]["entries"][0]["v"].as_f64().unwrap(), 2.0);
    let csv = fs::read_to_string(out.join("velocity.csv")).unwrap();
    assert!(csv.starts_with("t,x,y,v,contribution\n"));
}

#[test]
fn backtracking_curve_is_not_a_geodesic() {
    let dir = TempDir::new().unwrap();
    let curve = fixture(
        &dir,
        "back.json",
        r#"{"space": {"labels": ["a", "b"], "coords": [[0], [1]]},
            "generator": {"kind": "piecewise", "knots": [
                {"t": 0, "measure": [1, 0]}, {"t": 0.5, "measure": [0, 1]}, {"t": 1, "measure": [1, 0]}]}}"#,
    );
    let o = bvlift(&["curve", "geodesic", s(&curve), "--grid", "8", "--json"]);
    assert_eq!(code(&o), 1);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["variation"].as_f64().unwrap(), 2.0);
    assert_eq!(v["bv_geodesic"], false);
}

#[test]
fn slice_example_reports_the_jump() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("slice");
    let o = bvlift(&["example", "run", "slice2d", "--level", "8", "--json", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let jb = v["checks"].as_array().unwrap().iter().find(|c| c["name"] == "jump balance: rhs").unwrap();
    assert!((jb["value"].as_f64().unwrap() - 0.375).abs() < 1e-6);
    assert_eq!(v["params"]["eps"], 0.25);
    for f in ["report.json", "slice2d_profile.csv", "slice2d_velocity.csv", "slice2d_snapshots.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn periodic_dirac_example() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("p");
    let o = bvlift(&["example", "run", "periodic_sigma", "--sigma", "dirac", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let traj = fs::read_to_string(out.join("periodic_dirac_trajectories.csv")).unwrap();
    assert!(traj.starts_with("alpha,t,value\n"));
}

#[test]
fn reports_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = bvlift(&["example", "run", "nonunique_lifts", "--level", "4", "--out", s(out)]);
        assert_eq!(code(&o), 0);
    }
    for f in ["report.json", "nonunique_monotone_lift.csv", "nonunique_curve.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn suite_passes() {
    let o = bvlift(&["suite", "--json"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["criteria"].as_array().unwrap().len(), 9);
    assert_eq!(v["passed"], true);
}
