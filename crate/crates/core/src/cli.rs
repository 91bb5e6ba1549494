//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when correctness falls below the threshold
//! (`abort_below`, default 99%), 2 on configuration or driver errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::api::{BackendDriver, EmbeddedDriver, Engine, GdprQuery, RemoteDriver, Server};
use crate::bench::{self, latency_csv, BenchError, Report, RunConfig, RunOutcome, ValidationMode};
use crate::clock::ClockMode;
use crate::policy::{Role, NO_ACTOR};
use crate::store::persist::{AT_REST_KEY_ENV, DATA_DIR_ENV};
use crate::store::{AtRestTransform, IndexSet, Persistence, StoreConfig};
use crate::workload::Properties;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INCORRECT: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

const DEFAULT_LISTEN: &str = "127.0.0.1:7379";

#[derive(Debug, Parser)]
#[command(name = "gdprkv", version, about = "Personal-data store and GDPR workload benchmark")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Debug, Subcommand)]
enum Verb {
    /// Insert the initial records into the backend.
    Load {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        output: Output,
    },
    /// Load, then run the configured workloads and validate every response.
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        output: Output,
        /// The backend already holds exactly the load; skip inserting it.
        #[arg(long)]
        preloaded: bool,
    },
    /// Serve an embedded store over the wire protocol.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = DEFAULT_LISTEN)]
        listen: String,
    },
    /// Run one reaper pass on the backend.
    Reap {
        #[command(flatten)]
        common: Common,
    },
    /// Summarize a written report and gate on its correctness.
    Report {
        path: PathBuf,
        /// Minimum acceptable correctness in percent.
        #[arg(long, default_value_t = 99.0)]
        min_correctness: f64,
    },
    /// Print the backend's GDPR feature support.
    Features {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Property file of `key=value` lines.
    #[arg(short = 'P', long = "properties", value_name = "FILE")]
    properties: Option<PathBuf>,
    /// Property override; wins over the file. Repeatable.
    #[arg(short = 'p', value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// `embedded`, or the HOST:PORT of a `serve` instance.
    #[arg(long, default_value = "embedded")]
    driver: String,
    /// Persist the embedded store here (default: $GDPRKV_DATA_DIR if set).
    #[arg(long, value_name = "DIR")]
    data_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Output {
    /// Write the report here instead of standard output.
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
    /// Write per-operation latencies as CSV.
    #[arg(long, value_name = "FILE")]
    latencies: Option<PathBuf>,
}

/// Builds the embedded backend for a store configuration.
pub type DriverFactory<'a> = &'a dyn Fn(&StoreConfig) -> Result<Box<dyn BackendDriver>, String>;

/// Opens an engine, starting the background reaper on a wall clock.
pub fn embedded_driver(config: &StoreConfig) -> Result<Box<dyn BackendDriver>, String> {
    let engine = Arc::new(Engine::open(config.clone()).map_err(|e| e.to_string())?);
    if !engine.is_logical() {
        engine.start_reaper();
    }
    Ok(Box::new(EmbeddedDriver::new(engine)))
}

/// Entry point for the binary.
pub fn main(args: Vec<String>) -> i32 {
    run_with_driver_factory(args, &embedded_driver)
}

/// Like [`main`], with the embedded backend supplied by `factory`.
pub fn run_with_driver_factory(args: Vec<String>, factory: DriverFactory<'_>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    match dispatch(cli.verb, factory) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_ERROR
        }
    }
}

fn dispatch(verb: Verb, factory: DriverFactory<'_>) -> Result<i32, String> {
    match verb {
        Verb::Load { common, output } => {
            let props = properties(&common)?;
            let mut cfg = RunConfig::from_properties(&props)?;
            cfg.workloads.clear();
            bench_verb(&common, &output, &props, cfg, factory)
        }
        Verb::Run { common, output, preloaded } => {
            let props = properties(&common)?;
            let mut cfg = RunConfig::from_properties(&props)?;
            cfg.preloaded = preloaded;
            bench_verb(&common, &output, &props, cfg, factory)
        }
        Verb::Serve { common, listen } => {
            let props = properties(&common)?;
            let store = store_config(&common, &props, ClockMode::Wall)?;
            let engine = Arc::new(Engine::open(store.clone()).map_err(|e| e.to_string())?);
            if !engine.is_logical() {
                engine.start_reaper();
            }
            let server = Server::bind(engine, &listen).map_err(|e| e.to_string())?;
            println!("listening on {}", server.local_addr());
            let _ = std::io::stdout().flush();
            log::info!("serving with {}", describe(&store));
            server.wait();
            Ok(EXIT_OK)
        }
        Verb::Reap { common } => {
            let props = properties(&common)?;
            let driver = open_driver(&common, &props, factory)?;
            let n = driver.reap().map_err(|e| e.to_string())?;
            println!("reaped {n}");
            Ok(EXIT_OK)
        }
        Verb::Report { path, min_correctness } => {
            let text = fs::read_to_string(&path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            let report = Report::parse(&text)?;
            let pct: f64 = report
                .get("results", "correctness_pct")
                .ok_or("report has no correctness_pct")?
                .parse()
                .map_err(|e| format!("bad correctness_pct: {e}"))?;
            for (section, lines) in report.sections().filter(|(s, _)| *s != "config") {
                println!("[{section}]");
                for (k, v) in lines {
                    println!("{k}={v}");
                }
            }
            Ok(if pct < min_correctness { EXIT_INCORRECT } else { EXIT_OK })
        }
        Verb::Features { common } => {
            let props = properties(&common)?;
            let driver = open_driver(&common, &props, factory)?;
            let got = driver
                .execute(&Role::Regulator(NO_ACTOR.into()), &GdprQuery::GetSystemFeatures)
                .map_err(|e| e.to_string())?;
            for line in got.to_lines() {
                println!("{line}");
            }
            Ok(EXIT_OK)
        }
    }
}

fn properties(common: &Common) -> Result<Properties, String> {
    let mut props = match &common.properties {
        Some(path) => Properties::load(path)?,
        None => Properties::new(),
    };
    for o in &common.overrides {
        props.assign(o)?;
    }
    if let Some(seed) = common.seed {
        props.set("seed", &seed.to_string())?;
    }
    Ok(props)
}

/// Store settings from `clock`, `indices`, `audit` and `reap_interval_ms`.
fn store_config(common: &Common, props: &Properties, default_clock: ClockMode) -> Result<StoreConfig, String> {
    let mut cfg = StoreConfig {
        clock_mode: props.get_or("clock", default_clock)?,
        index_attributes: props.get_or("indices", IndexSet::all())?,
        audit: props.get_or("audit", true)?,
        reap_interval_ms: props.get_or("reap_interval_ms", 500u64)?,
        ..StoreConfig::default()
    };
    if let Some(dir) = &common.data_dir {
        cfg.persistence = Persistence::AppendLog { dir: Some(dir.clone()) };
    } else if std::env::var_os(DATA_DIR_ENV).is_some() {
        cfg.persistence = Persistence::AppendLog { dir: None };
    }
    if cfg.persistence != Persistence::None && std::env::var_os(AT_REST_KEY_ENV).is_some() {
        cfg.at_rest_transform = AtRestTransform::Encrypted { secret: None };
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn describe(cfg: &StoreConfig) -> String {
    format!(
        "clock={:?} indices={} audit={} reap_interval_ms={}",
        cfg.clock_mode, cfg.index_attributes, cfg.audit, cfg.reap_interval_ms
    )
}

fn open_driver(
    common: &Common,
    props: &Properties,
    factory: DriverFactory<'_>,
) -> Result<Box<dyn BackendDriver>, String> {
    if common.driver == "embedded" {
        let threads: usize = props.get_or("threads", 1)?;
        let strict = props.get::<ValidationMode>("validation")?.unwrap_or(if threads == 1 {
            ValidationMode::Strict
        } else {
            ValidationMode::Partitioned
        }) == ValidationMode::Strict;
        let clock = if strict { ClockMode::Logical } else { ClockMode::Wall };
        factory(&store_config(common, props, clock)?)
    } else {
        let driver = RemoteDriver::connect(&common.driver).map_err(|e| format!("driver unreachable: {e}"))?;
        Ok(Box::new(driver))
    }
}

fn bench_verb(
    common: &Common,
    output: &Output,
    props: &Properties,
    mut cfg: RunConfig,
    factory: DriverFactory<'_>,
) -> Result<i32, String> {
    let driver = open_driver(common, props, factory)?;
    if common.driver == "embedded" {
        let store = store_config(common, props, ClockMode::Logical)?;
        cfg.echo.push(("indices".into(), store.index_attributes.to_string()));
        cfg.echo.push(("audit".into(), store.audit.to_string()));
    }
    if props.raw("validation").is_none() && cfg.workers() == 1 {
        // Follow the backend: exact checks need a clock the runner can step.
        let logical = driver.stats().map_err(|e| format!("driver unreachable: {e}"))?.logical_clock;
        cfg.validation = if logical { ValidationMode::Strict } else { ValidationMode::Partitioned };
    }
    let threshold = cfg.abort_below_pct;
    match bench::run(driver.as_ref(), &cfg) {
        Ok(out) => {
            emit(output, &out)?;
            let pct = out.metrics.correctness_pct;
            eprintln!("correctness {pct:.4}% over {} ops", out.metrics.attempted());
            Ok(if pct < threshold { EXIT_INCORRECT } else { EXIT_OK })
        }
        Err(BenchError::ValidationAbort { workload, correctness, outcome }) => {
            emit(output, &outcome)?;
            eprintln!("validation aborted during {workload}: correctness {correctness:.4}%");
            Ok(EXIT_INCORRECT)
        }
        Err(e) => Err(e.to_string()),
    }
}

fn emit(output: &Output, out: &RunOutcome) -> Result<(), String> {
    let text = out.report.render();
    match &output.report {
        Some(path) => write_file(path, &text)?,
        None => print!("{text}"),
    }
    if let Some(path) = &output.latencies {
        write_file(path, &latency_csv(&out.samples))?;
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<(), String> {
    fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}
