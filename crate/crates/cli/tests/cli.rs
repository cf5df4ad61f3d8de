//! End-to-end runs of the `echelon` binary on the bundled scenario.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use echelon_core::config::FIVE_FACILITY_EXAMPLE;
use tempfile::TempDir;

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    /// A temporary copy of the bundled configuration with generated history.
    fn new() -> Self {
        let ws = Self::without_history();
        let out = ws.run(&["generate-data", "--config", ws.config().to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        ws
    }

    fn without_history() -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("scenario.toml"), FIVE_FACILITY_EXAMPLE).unwrap();
        Self { dir }
    }

    fn config(&self) -> PathBuf {
        self.dir.path().join("scenario.toml")
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_echelon"))
            .args(args)
            .current_dir(self.dir.path())
            .output()
            .unwrap()
    }

    /// Runs a scenario subcommand with `--config` filled in and a short
    /// horizon and few replications to keep the test fast.
    fn run_quick(&self, subcommand: &str, extra: &[&str]) -> Output {
        let config = self.config();
        let mut args = vec![
            subcommand,
            "--config",
            config.to_str().unwrap(),
            "--replications",
            "2",
            "--horizon",
            "120",
        ];
        args.extend_from_slice(extra);
        self.run(&args)
    }
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn generate_data_writes_one_file_per_series_deterministically() {
    let ws = Workspace::new();
    let first = csv_files(&ws.path("history"));
    let names: Vec<&str> = first.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names.iter().filter(|n| n.starts_with("demand_")).count(), 4);
    assert_eq!(names.iter().filter(|n| n.starts_with("lead_delta_")).count(), 5);
    assert!(!names.contains(&"demand_3.csv"));

    let out = ws.run(&["generate-data", "--config", ws.config().to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(csv_files(&ws.path("history")), first);

    let other = ws.path("other");
    let out = ws.run(&[
        "generate-data",
        "--config",
        ws.config().to_str().unwrap(),
        "--seed",
        "99",
        "--out",
        other.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_ne!(csv_files(&other), first);
}

#[test]
fn evaluate_exit_codes_follow_feasibility() {
    let ws = Workspace::new();
    let out = ws.run_quick("evaluate", &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("PASS"));

    let starved = ws.path("starved.json");
    let entries: Vec<String> = (1..=5)
        .map(|id| format!(r#"{{"facility": {id}, "reorder_point": 0, "base_stock": 0}}"#))
        .collect();
    fs::write(&starved, format!(r#"{{"policy": [{}]}}"#, entries.join(","))).unwrap();
    let out = ws.run_quick("evaluate", &["--policy", starved.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stdout(&out).contains("FAIL"));
}

#[test]
fn usage_and_data_errors_exit_with_one() {
    let ws = Workspace::without_history();
    let out = ws.run(&["evaluate", "--config", ws.config().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let missing = ws.path("history").join("demand_1.csv");
    assert!(stderr(&out).contains(missing.to_str().unwrap()), "{}", stderr(&out));

    let out = ws.run(&["evaluate", "--config", "no-such-file.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("no-such-file.toml"));

    let out = ws.run(&["evaluate", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    let out = ws.run(&["optimize", "--config", "x", "--strategy", "simplex", "--out", "o"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(ws.run(&["--help"]).status.code(), Some(0));
}

#[test]
fn simulate_writes_trace_and_outcome() {
    let ws = Workspace::new();
    let out_dir = ws.path("sim");
    let out = ws.run_quick("simulate", &["--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let trace = fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("day,facility,on_hand,inv_position,backorders,demand,shipped"));
    assert_eq!(lines.count(), 120 * 5);
    let outcome: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("outcome.json")).unwrap()).unwrap();
    assert_eq!(outcome["facilities"].as_array().unwrap().len(), 5);
}

#[test]
fn optimize_with_one_evaluation_reports_no_reduction() {
    let ws = Workspace::new();
    let out_dir = ws.path("opt");
    let out = ws.run_quick(
        "optimize",
        &["--strategy", "nelder-mead", "--max-evals", "1", "--out", out_dir.to_str().unwrap()],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("% reduction from the initial guess: 0.00%"), "{}", stdout(&out));
    let log = fs::read_to_string(out_dir.join("run_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 2);
    for name in ["best_policy.json", "summary.json", "manifest.json"] {
        assert!(out_dir.join(name).exists(), "{name}");
    }
}

#[test]
fn optimize_run_logs_are_reproducible() {
    let ws = Workspace::new();
    let run = |name: &str| {
        let dir = ws.path(name);
        let out = ws.run_quick(
            "optimize",
            &["--strategy", "rbf", "--max-evals", "15", "--out", dir.to_str().unwrap()],
        );
        assert!(out.status.success(), "{}", stderr(&out));
        let log = fs::read_to_string(dir.join("run_log.csv")).unwrap();
        let best: Vec<f64> = log
            .lines()
            .skip(1)
            .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
            .collect();
        assert_eq!(best.len(), 15);
        assert!(best.windows(2).all(|w| w[1] <= w[0]));
        log
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn compare_emits_one_table_per_choice() {
    let ws = Workspace::new();
    let out_dir = ws.path("cmp");
    let out = ws.run_quick(
        "compare",
        &[
            "--strategy",
            "rbf",
            "--max-evals",
            "12",
            "--choice",
            "backorder",
            "--choice",
            "lost-sales",
            "--out",
            out_dir.to_str().unwrap(),
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.matches("Optimal objective").count(), 2);
    assert!(text.contains("back ordered") && text.contains("lost"));
    for choice in ["backorder", "lost-sales"] {
        let csv = fs::read_to_string(out_dir.join(format!("compare_{choice}.csv"))).unwrap();
        assert_eq!(csv.lines().next(), Some(",Cubic RBF"));
        assert!(csv.contains("Total iterations,12\n"));
        assert!(out_dir.join(choice).join("rbf_run_log.csv").exists());
    }
}
