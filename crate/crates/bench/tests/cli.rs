//! The `stackgp` binary end to end.

use std::process::Command;

fn stackgp(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_stackgp")).args(args).output().unwrap()
}

#[test]
fn run_writes_the_report_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let status = stackgp(&[
        "run", "--problem", "sextic", "--backend", "lgp2d_reg", "--batch", "4", "--registers", "2", "--seed", "7",
        "--pop", "40", "--generations", "3", "--cases", "500", "--out", out.to_str().unwrap(),
    ]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    for key in ["config", "gpops", "wall_seconds", "total_node_evals", "generations", "env"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    assert_eq!(report["config"]["seed"], 7);
    assert_eq!(report["config"]["backends"][0], "lgp2d_reg");
    let gens = report["generations"].as_array().unwrap();
    assert_eq!(gens.len(), 4);
    for g in gens {
        for key in ["best_fitness", "mean_fitness", "node_evals", "seconds"] {
            assert!(g.get(key).is_some());
        }
    }
    assert!(report["gpops"].as_f64().unwrap() > 0.0);
    assert!(report["env"]["cores"].as_u64().unwrap() >= 1);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(stackgp(&["run", "--backend", "lgp2d_reg", "--registers", "0"]).status.code(), Some(2));
    assert_eq!(stackgp(&["run", "--backend", "lgp2d", "--batch", "7"]).status.code(), Some(2));
    assert_eq!(stackgp(&["run", "--backend", "rpn1d", "--batch", "4"]).status.code(), Some(2));
    assert_eq!(stackgp(&["run", "--frobnicate"]).status.code(), Some(2));
    assert_eq!(stackgp(&["run", "--backend", "gpu"]).status.code(), Some(2));
    assert_eq!(stackgp(&["run", "--problem", "mux7"]).status.code(), Some(2));
    assert_eq!(stackgp(&["run", "--problem", "csv:/tmp/x.csv"]).status.code(), Some(2));
    assert_eq!(stackgp(&["teleport"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1() {
    let out = stackgp(&["run", "--problem", "csv:/nonexistent/data.csv", "--target-class", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
    let out = stackgp(&["run", "--problem", "sextic", "--backend", "bool_packed", "--cases", "50"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn matrix_csv_columns() {
    let out = stackgp(&[
        "matrix", "--problem", "mux6", "--backend", "rpn1d,lgp2d,bool_packed", "--batch", "2", "--workers", "1,2",
        "--pop", "30", "--generations", "2", "--repeats", "2", "--format", "csv",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "backend,B,R,workers,gpops_mean,gpops_sd");
    assert_eq!(lines.len(), 1 + 3 * 2);
    assert!(lines[3].starts_with("lgp2d,2,0,1,"));
    assert!(lines[5].starts_with("bool_packed,1,0,1,"));
}

#[test]
fn stacktable_and_csv_problem() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let rows: String = (0..60).map(|i| format!("{},{},{}\n", i, 60 - i, if i % 3 == 0 { "a" } else { "b" })).collect();
    std::fs::write(&data, rows).unwrap();
    let problem = format!("csv:{}", data.display());
    let out = stackgp(&[
        "stacktable", "--problem", &problem, "--target-class", "a", "--pop", "30", "--generations", "2", "--format",
        "csv",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 12);
    for w in rows.windows(2) {
        assert!(w[1][1] >= w[0][1] && w[1][2] >= w[0][2]);
    }
    assert!(rows.iter().all(|r| r[2] >= r[1] && r[2] <= 100.0));
}

#[test]
fn verify_quick_passes() {
    let out = stackgp(&["verify", "--quick"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().all(|l| l.starts_with("PASS ")));
    assert_eq!(text.lines().count(), 10);
}
