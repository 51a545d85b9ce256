//! End-to-end runs of the command-line interface, in process.

use std::fs;
use std::path::Path;

use trajmt::analytics::calibrate_thresholds;
use trajmt::cli::{run, EXIT_ERROR, EXIT_OK, EXIT_VIOLATION};
use trajmt::mt::{Pattern, RowsFile};
use trajmt::scene::{TaskKind, TestSuite};

fn trajmt(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(
        std::iter::once("trajmt").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn gen(dir: &Path, name: &str, extra: &[&str]) -> std::path::PathBuf {
    let suite = dir.join(name);
    let mut args = vec!["gen", "--seed", "5", "--sources-per-task", "3", "--out", p(&suite)];
    args.extend_from_slice(extra);
    let (code, _, err) = trajmt(&args);
    assert_eq!(code, EXIT_OK, "{err}");
    suite
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = fs::read_to_string(gen(dir.path(), "a.json", &[])).unwrap();
    let b = fs::read_to_string(gen(dir.path(), "b.json", &[])).unwrap();
    assert_eq!(a, b);
    assert_eq!(TestSuite::from_json(&a).unwrap().cases.len(), 12);
}

#[test]
fn gen_respects_task_filter() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("s.json");
    let (code, _, err) = trajmt(&[
        "gen",
        "--tasks",
        "pick_up",
        "--sources-per-task",
        "10",
        "--out",
        p(&suite),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let s = TestSuite::from_json(&fs::read_to_string(suite).unwrap()).unwrap();
    assert_eq!(s.cases.len(), 10);
    assert!(s.cases.iter().all(|c| c.prompt.task == TaskKind::PickUp));
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"seed": 5, "tasks": ["put_in"], "sources_per_task": 2}"#).unwrap();
    let suite = dir.path().join("s.json");
    let (code, _, err) = trajmt(&["--config", p(&cfg), "gen", "--out", p(&suite)]);
    assert_eq!(code, EXIT_OK, "{err}");
    let s = TestSuite::from_json(&fs::read_to_string(suite).unwrap()).unwrap();
    assert_eq!(s.cases.len(), 2);

    fs::write(&cfg, r#"{"sead": 5}"#).unwrap();
    assert_eq!(
        trajmt(&["--config", p(&cfg), "gen", "--out", p(&dir.path().join("t.json"))]).0,
        EXIT_ERROR
    );
}

#[test]
fn fault_free_consistency_run_passes() {
    let dir = tempfile::tempdir().unwrap();
    let suite = gen(dir.path(), "s.json", &[]);
    let rows = dir.path().join("rows.json");
    let (code, _, err) = trajmt(&[
        "run",
        p(&suite),
        "--mrs",
        "MR1,MR2,MR3",
        "--fault",
        "none",
        "--fail-on-violation",
        "--out",
        p(&rows),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let file = RowsFile::from_json(&fs::read_to_string(rows).unwrap()).unwrap();
    assert!(!file.rows.is_empty());
    assert!(file.rows.iter().all(|r| !r.is_violation()));
}

#[test]
fn negation_blindness_fails_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let suite = gen(dir.path(), "s.json", &[]);
    let traces = dir.path().join("traces");
    let rows = dir.path().join("rows.json");
    let args = [
        "run",
        p(&suite),
        "--mrs",
        "MR4",
        "--fault",
        "negation_blindness",
        "--out",
        p(&rows),
        "--trace-dir",
        p(&traces),
    ];
    assert_eq!(trajmt(&args).0, EXIT_OK);
    let mut strict = args.to_vec();
    strict.push("--fail-on-violation");
    assert_eq!(trajmt(&strict).0, EXIT_VIOLATION);
    assert!(fs::read_dir(traces).unwrap().count() > 0);
}

#[test]
fn errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let (code, _, err) = trajmt(&["run", p(&missing)]);
    assert_eq!(code, EXIT_ERROR);
    assert!(err.starts_with("error:"), "{err}");
    assert_eq!(trajmt(&["run", "--no-such-flag"]).0, EXIT_ERROR);
    assert_eq!(
        trajmt(&["gen", "--tasks", "juggle", "--out", p(&missing)]).0,
        EXIT_ERROR
    );
    assert_eq!(trajmt(&["report", p(&missing)]).0, EXIT_ERROR);
}

#[test]
fn help_and_version_exit_zero() {
    let (code, out, _) = trajmt(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("calibrate"));
    assert_eq!(trajmt(&["--version"]).0, EXIT_OK);
}

#[test]
fn report_and_calibrate() {
    let dir = tempfile::tempdir().unwrap();
    let suite = gen(dir.path(), "s.json", &[]);
    let rows = dir.path().join("rows.json");
    let (code, _, err) = trajmt(&[
        "run",
        p(&suite),
        "--fault",
        "distractor_attraction:0.6",
        "--out",
        p(&rows),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");

    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let (code, _, err) = trajmt(&["report", p(&rows), "--out", p(d)]);
        assert_eq!(code, EXIT_OK, "{err}");
    }
    for name in ["report.csv", "summary.json", "heatmap.svg"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }

    let file = RowsFile::from_json(&fs::read_to_string(&rows).unwrap()).unwrap();
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    let evaluated = file.rows.iter().filter(|r| r.is_evaluated()).count();
    assert_eq!(summary["rows"], file.rows.len());
    assert_eq!(summary["evaluated_rows"], evaluated);
    assert_eq!(summary["skipped_rows"], file.rows.len() - evaluated);
    let csv = fs::read_to_string(a.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), file.rows.len() + 1);

    let (code, _, err) = trajmt(&["report", p(&rows), "--format", "csv", "--out", p(&dir.path().join("c"))]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(!dir.path().join("c/summary.json").exists());

    let thresholds = dir.path().join("t.json");
    let (code, _, err) = trajmt(&["calibrate", p(&rows), "--out", p(&thresholds)]);
    assert_eq!(code, EXIT_OK, "{err}");
    let mut seen = std::collections::BTreeSet::new();
    let distances: Vec<f64> = file
        .rows
        .iter()
        .filter(|r| r.mr.pattern() == Pattern::TC && r.is_evaluated() && seen.insert(r.followup_id.clone()))
        .filter_map(|r| r.distance)
        .collect();
    let (p20, p50, p80) = calibrate_thresholds(&distances).unwrap();
    let t: serde_json::Value = serde_json::from_str(&fs::read_to_string(thresholds).unwrap()).unwrap();
    assert_eq!(t["samples"], distances.len());
    for (key, v) in [("p20", p20), ("p50", p50), ("p80", p80)] {
        assert!((t[key].as_f64().unwrap() - v).abs() <= 1e-9 * v.abs().max(1.0), "{key}");
    }
}
