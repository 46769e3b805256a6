//! Command-line behaviour: output files, edge cases and error reports.

mod common;

use std::path::{Path, PathBuf};
use std::process::Command;

use ncvpath::*;

struct Inputs {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Inputs {
    fn new(family: Family, penalty: PenaltyFamily) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let d = common::design(60, 12, 0.2, family, penalty, 7);
        let data = d.generate(0).unwrap();
        let x: String = (0..data.n())
            .map(|i| data.x.row(i).iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",") + "\n")
            .collect();
        std::fs::write(root.join("x.csv"), x).unwrap();
        let y: String = data.y.iter().map(|v| format!("{v}\n")).collect();
        std::fs::write(root.join("y.csv"), y).unwrap();
        let g: String = (0..data.p()).map(|j| format!("{}\n", j / 4 + 1)).collect();
        std::fs::write(root.join("g.csv"), g).unwrap();
        Inputs { _dir: dir, root }
    }

    fn arg(&self, name: &str) -> String {
        self.root.join(name).to_str().unwrap().to_string()
    }

    fn run(&self, args: &[&str]) -> std::process::Output {
        Command::new(env!("CARGO_BIN_EXE_ncvpath"))
            .args(args)
            .current_dir(&self.root)
            .output()
            .unwrap()
    }
}

fn lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

#[test]
fn fit_writes_path_violations_and_summary() {
    let inp = Inputs::new(Family::Gaussian, PenaltyFamily::Mcp);
    let out = inp.run(&["fit", "--x", &inp.arg("x.csv"), "--y", &inp.arg("y.csv"), "--nlambda", "20", "--out-prefix", "run"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let listed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(listed["files"].as_array().unwrap().len(), 3);

    let path = lines(&inp.root.join("run_path.csv"));
    assert_eq!(path.len(), 21);
    assert!(path[0].starts_with("lambda,intercept,"));
    let violations = lines(&inp.root.join("run_violations.csv"));
    assert_eq!(violations[0], "lambda_index,lambda,n_violations,locally_convex,indices");
    // one row per lambda with a violation, 1-based indices
    assert!(violations[1..].iter().all(|r| !r.starts_with("0,") && !r.starts_with("1,")));

    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(inp.root.join("run_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["schema_version"], 1);
    assert_eq!(summary["command"], "fit");
}

#[test]
fn a_single_lambda_gives_one_all_zero_row() {
    let inp = Inputs::new(Family::Gaussian, PenaltyFamily::Scad);
    let out = inp.run(&["fit", "--x", &inp.arg("x.csv"), "--y", &inp.arg("y.csv"), "--penalty", "scad", "--nlambda", "1", "--out-prefix", "one"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let path = lines(&inp.root.join("one_path.csv"));
    assert_eq!(path.len(), 2);
    let row: Vec<f64> = path[1].split(',').map(|v| v.parse().unwrap()).collect();
    assert!(row[2..].iter().all(|b| *b == 0.0));
    let violations = lines(&inp.root.join("one_violations.csv"));
    assert_eq!(violations.len(), 1, "no violations at lambda_max");
}

#[test]
fn group_fit_writes_long_format_group_path() {
    let inp = Inputs::new(Family::Binomial, PenaltyFamily::GroupMcp);
    let out = inp.run(&[
        "fit", "--x", &inp.arg("x.csv"), "--y", &inp.arg("y.csv"), "--groups", &inp.arg("g.csv"),
        "--family", "binomial", "--penalty", "gmcp", "--nlambda", "10", "--out-prefix", "grp",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let g = lines(&inp.root.join("grp_group_path.csv"));
    assert_eq!(g[0], "lambda_index,lambda,variable,group_id,coefficient");
    // one row per lambda and variable
    let path_rows = lines(&inp.root.join("grp_path.csv")).len() - 1;
    assert_eq!(g.len() - 1, path_rows * 12);
}

#[test]
fn group_penalty_without_groups_reports_json_error() {
    let inp = Inputs::new(Family::Gaussian, PenaltyFamily::Mcp);
    let out = inp.run(&["fit", "--x", &inp.arg("x.csv"), "--y", &inp.arg("y.csv"), "--penalty", "gscad"]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["schema_version"], 1);
    assert!(err["error"].is_string());
    assert!(err["message"].as_str().unwrap().contains("group"));
}

#[test]
fn missing_input_reports_json_error() {
    let inp = Inputs::new(Family::Gaussian, PenaltyFamily::Mcp);
    let out = inp.run(&["fit", "--x", "nope.csv", "--y", &inp.arg("y.csv")]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["message"].as_str().unwrap().contains("nope.csv"));
}

#[test]
fn cv_selects_a_lambda_on_the_grid() {
    let inp = Inputs::new(Family::Poisson, PenaltyFamily::Mcp);
    let out = inp.run(&[
        "cv", "--x", &inp.arg("x.csv"), "--y", &inp.arg("y.csv"), "--family", "poisson",
        "--nlambda", "15", "--folds", "4", "--out-prefix", "cv",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(inp.root.join("cv_summary.json")).unwrap()).unwrap();
    let k = summary["selected_index"].as_u64().unwrap();
    assert!((1..=15).contains(&k), "{summary}");
    assert_eq!(lines(&inp.root.join("cv_cv.csv")).len(), 16);
}
