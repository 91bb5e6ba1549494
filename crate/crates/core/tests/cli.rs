//! The command-line front end: exit codes, reports, persistence across
//! invocations, and fault detection with a corrupting backend.

use std::path::Path;
use std::process::{Command, Output};

use gdprkv::api::{BackendDriver, DriverStats, GdprQuery, QueryResponse};
use gdprkv::cli::{embedded_driver, run_with_driver_factory, EXIT_ERROR, EXIT_INCORRECT, EXIT_OK};
use gdprkv::policy::Role;
use gdprkv::store::StoreConfig;

const SMALL: &[&str] = &["-p", "recordcount=1000", "-p", "operationcount=200"];

fn gdprkv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gdprkv"))
        .args(args)
        .env_remove("GDPRKV_DATA_DIR")
        .env_remove("GDPRKV_AT_REST_KEY")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn args<'a>(head: &[&'a str], tail: &[&'a str]) -> Vec<&'a str> {
    head.iter().chain(tail).copied().collect()
}

/// The report minus the sections that legitimately vary between runs.
fn stable_body(path: &Path) -> String {
    let text = std::fs::read_to_string(path).unwrap();
    let mut keep = true;
    let mut out = String::new();
    for line in text.lines() {
        if line.starts_with('[') {
            keep = line != "[timing]";
        }
        if keep {
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}

#[test]
fn exit_codes() {
    assert_eq!(code(&gdprkv(&["--help"])), EXIT_OK);
    assert_eq!(code(&gdprkv(&["frobnicate"])), EXIT_ERROR);
    assert_eq!(code(&gdprkv(&["run", "-p", "recordcount=many"])), EXIT_ERROR);
    assert_eq!(code(&gdprkv(&["run", "-p", "no_such_property=1"])), EXIT_ERROR);
    assert_eq!(code(&gdprkv(&["run", "-p", "validation=strict", "-p", "threads=4"])), EXIT_ERROR);
    let unreachable = gdprkv(&args(&["run", "--driver", "127.0.0.1:1"], SMALL));
    assert_eq!(code(&unreachable), EXIT_ERROR);
    assert!(stderr(&unreachable).contains("unreachable"), "{}", stderr(&unreachable));
    assert_eq!(code(&gdprkv(&["report", "/nonexistent/report.txt"])), EXIT_ERROR);
}

#[test]
fn run_writes_a_report_that_gates_on_correctness() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.txt");
    let latencies = dir.path().join("lat.csv");
    let out = gdprkv(&args(
        &["run", "--seed", "4", "--report", report.to_str().unwrap(), "--latencies", latencies.to_str().unwrap()],
        SMALL,
    ));
    assert_eq!(code(&out), EXIT_OK, "{}", stderr(&out));
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.contains("correctness_pct=100.0000"), "{text}");
    for w in ["controller", "customer", "processor", "regulator"] {
        assert!(text.contains(&format!("{w}.completion_ms=")), "{w} missing: {text}");
    }
    let csv = std::fs::read_to_string(&latencies).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 200, "one header plus one row per op");

    let summary = gdprkv(&["report", report.to_str().unwrap(), "--min-correctness", "100"]);
    assert_eq!(code(&summary), EXIT_OK);
    assert!(!String::from_utf8_lossy(&summary.stdout).contains("[config]"));

    let failing = dir.path().join("failing.txt");
    std::fs::write(&failing, text.replace("correctness_pct=100.0000", "correctness_pct=42.0000")).unwrap();
    assert_eq!(code(&gdprkv(&["report", failing.to_str().unwrap()])), EXIT_INCORRECT);
}

#[test]
fn same_seed_gives_the_same_report_body() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = (0..2).map(|i| dir.path().join(format!("r{i}.txt"))).collect();
    for p in &paths {
        let out = gdprkv(&args(&["run", "--seed", "9", "--report", p.to_str().unwrap()], SMALL));
        assert_eq!(code(&out), EXIT_OK, "{}", stderr(&out));
    }
    assert_eq!(stable_body(&paths[0]), stable_body(&paths[1]));
}

#[test]
fn load_then_run_preloaded_from_a_data_dir() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let data = data.to_str().unwrap();
    let load = gdprkv(&args(&["load", "--data-dir", data], SMALL));
    assert_eq!(code(&load), EXIT_OK, "{}", stderr(&load));
    assert!(std::fs::read_dir(data).unwrap().count() > 0, "nothing persisted");

    let report = dir.path().join("report.txt");
    let run = gdprkv(&args(&["run", "--preloaded", "--data-dir", data, "--report", report.to_str().unwrap()], SMALL));
    assert_eq!(code(&run), EXIT_OK, "{}", stderr(&run));
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.contains("preloaded=true") && text.contains("correctness_pct=100.0000"), "{text}");
}

#[test]
fn features_lists_every_capability() {
    let out = gdprkv(&["features", "-p", "indices=usr"]);
    assert_eq!(code(&out), EXIT_OK);
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5, "{text}");
    assert!(lines.contains(&"METADATA_INDEXING=PARTIAL"), "{text}");
}

/// Drops the last record of every multi-record read, as a buggy backend
/// might when it loses an index entry.
struct LossyDriver(Box<dyn BackendDriver>);

impl BackendDriver for LossyDriver {
    fn execute(&self, role: &Role, query: &GdprQuery) -> gdprkv::Result<QueryResponse> {
        match self.0.execute(role, query)? {
            QueryResponse::Records(mut rs) if rs.len() > 1 => {
                rs.pop();
                Ok(QueryResponse::Records(rs))
            }
            other => Ok(other),
        }
    }
    fn now_ms(&self) -> gdprkv::Result<u64> {
        self.0.now_ms()
    }
    fn advance(&self, ms: u64) -> gdprkv::Result<bool> {
        self.0.advance(ms)
    }
    fn reap(&self) -> gdprkv::Result<usize> {
        self.0.reap()
    }
    fn stats(&self) -> gdprkv::Result<DriverStats> {
        self.0.stats()
    }
    fn name(&self) -> &str {
        "lossy"
    }
}

#[test]
fn a_corrupting_backend_fails_the_run() {
    let lossy = |cfg: &StoreConfig| -> Result<Box<dyn BackendDriver>, String> {
        Ok(Box::new(LossyDriver(embedded_driver(cfg)?)))
    };
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.txt");
    let argv: Vec<String> = ["gdprkv", "run", "-p", "recordcount=1000", "-p", "workload=processor", "--report"]
        .into_iter()
        .map(String::from)
        .chain([report.to_str().unwrap().to_string()])
        .collect();
    assert_eq!(run_with_driver_factory(argv.clone(), &lossy), EXIT_INCORRECT);
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(!text.contains("correctness_pct=100.0000"), "{text}");
    assert_eq!(run_with_driver_factory(argv, &embedded_driver), EXIT_OK);
}
