use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Barrier;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use parking_lot::Mutex;
use thiserror::Error;

use super::metrics::{compute_metrics, MetricsReport, OpSample, RawWorkload};
use super::oracle::{Oracle, OracleConfig, Window};
use super::report::Report;
use crate::api::{response_class, BackendDriver};
use crate::store::SpaceStats;
use crate::workload::{Generator, LoadSpec, Properties, WorkloadName, WorkloadSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationMode {
    /// One worker on a logical clock; every response is checked exactly.
    Strict,
    /// Many workers; exact per partition, predicate checks for global selectors.
    Partitioned,
}

impl fmt::Display for ValidationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValidationMode::Strict => "strict",
            ValidationMode::Partitioned => "partitioned",
        })
    }
}

impl FromStr for ValidationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "strict" => Ok(ValidationMode::Strict),
            "partitioned" => Ok(ValidationMode::Partitioned),
            other => Err(format!("unknown validation mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub load: LoadSpec,
    pub workloads: Vec<WorkloadSpec>,
    pub validation: ValidationMode,
    pub seed: u64,
    /// Logical milliseconds added before each STRICT op.
    pub tick_ms: u64,
    /// Logical interval between STRICT reaper passes.
    pub reap_interval_ms: u64,
    /// Abort once correctness falls below this after 100 ops.
    pub abort_below_pct: f64,
    /// The backend already holds the load; skip executing it.
    pub preloaded: bool,
    pub active_users: Option<usize>,
    pub misuse_share: f64,
    /// Extra `[config]` lines, e.g. backend settings.
    pub echo: Vec<(String, String)>,
}

impl RunConfig {
    pub fn new(load: LoadSpec, workloads: Vec<WorkloadSpec>) -> RunConfig {
        let validation = if load.partitions == 1 { ValidationMode::Strict } else { ValidationMode::Partitioned };
        RunConfig {
            seed: load.seed,
            load,
            workloads,
            validation,
            tick_ms: 10,
            reap_interval_ms: 500,
            abort_below_pct: 99.0,
            preloaded: false,
            active_users: None,
            misuse_share: 0.0,
            echo: Vec::new(),
        }
    }

    pub fn workers(&self) -> usize {
        self.load.partitions
    }

    pub fn from_properties(p: &Properties) -> Result<RunConfig, String> {
        let mut cfg = RunConfig::new(p.load_spec()?, p.workload_specs()?);
        if let Some(v) = p.get("validation")? {
            cfg.validation = v;
        }
        cfg.tick_ms = p.get_or("tick_ms", cfg.tick_ms)?;
        cfg.reap_interval_ms = p.get_or("reap_interval_ms", cfg.reap_interval_ms)?;
        cfg.abort_below_pct = p.get_or("abort_below", cfg.abort_below_pct)?;
        cfg.active_users = p.get("activeusers")?;
        cfg.misuse_share = p.get_or("misuse_share", 0.0)?;
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        if let Err(e) = self.load.validate() {
            return bad(e);
        }
        if self.validation == ValidationMode::Strict && self.workers() != 1 {
            return bad(format!("strict validation needs exactly one worker, got {}", self.workers()));
        }
        if self.reap_interval_ms == 0 {
            return bad("reap_interval_ms must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.misuse_share) {
            return bad(format!("misuse_share must lie in [0, 1], got {}", self.misuse_share));
        }
        for w in &self.workloads {
            w.validate().map_err(BenchError::Config)?;
        }
        Ok(())
    }

    fn config_lines(&self, driver: &str) -> Vec<(String, String)> {
        let l = &self.load;
        let mut out: Vec<(String, String)> = vec![
            ("driver".into(), driver.into()),
            ("validation".into(), self.validation.to_string()),
            ("threads".into(), self.workers().to_string()),
            ("seed".into(), self.seed.to_string()),
            ("recordcount".into(), l.record_count.to_string()),
            ("usercount".into(), l.users.to_string()),
            ("activeusers".into(), self.active_users.unwrap_or(l.users).to_string()),
            ("purposecount".into(), l.purposes.to_string()),
            ("partnercount".into(), l.partners.to_string()),
            ("keylength".into(), l.key_len.to_string()),
            ("fieldlength".into(), l.data_len.to_string()),
            ("metadatalength".into(), l.metadata_len.to_string()),
            ("ttl_short_s".into(), l.ttl_short_s.to_string()),
            ("ttl_long_s".into(), l.ttl_long_s.to_string()),
            ("ttl_short_share".into(), l.ttl_short_share.to_string()),
            ("tick_ms".into(), self.tick_ms.to_string()),
            ("reap_interval_ms".into(), self.reap_interval_ms.to_string()),
            ("misuse_share".into(), self.misuse_share.to_string()),
            ("preloaded".into(), self.preloaded.to_string()),
            ("workloads".into(), self.workloads.iter().map(|w| w.name.name()).collect::<Vec<_>>().join(",")),
        ];
        for w in &self.workloads {
            out.push((format!("{}.operationcount", w.name), w.operation_count.to_string()));
            out.push((format!("{}.distribution", w.name), w.distribution.to_string()));
            for (t, weight) in &w.weights {
                out.push((format!("{}.weight.{t}", w.name), format!("{weight:.4}")));
            }
        }
        out.extend(self.echo.iter().cloned());
        out
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: Report,
    pub metrics: MetricsReport,
    pub samples: Vec<OpSample>,
    pub load_mismatches: u64,
    pub reap_mismatches: u64,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("driver unreachable: {0}")]
    DriverUnreachable(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("load phase failed: {0}")]
    Load(String),
    #[error("validation aborted during {workload}: correctness {correctness:.2}%")]
    ValidationAbort { workload: WorkloadName, correctness: f64, outcome: Box<RunOutcome> },
}

/// How a worker learns when the backend ran a query.
#[derive(Debug, Clone, Copy)]
enum Timebase {
    /// STRICT: the runner owns the clock and knows it exactly.
    Stepped { now: u64 },
    /// Logical clock nobody advances.
    Frozen { now: u64 },
    /// Wall clock: local time shifted onto the backend's, with slack.
    Wall { offset: i64, slack: u64 },
}

fn local_ms() -> i64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as i64).unwrap_or(0)
}

impl Timebase {
    fn sync(driver: &dyn BackendDriver, logical: bool, validation: ValidationMode) -> Result<Timebase, BenchError> {
        let unreachable = |e: crate::Error| BenchError::DriverUnreachable(e.to_string());
        if logical {
            let now = driver.now_ms().map_err(unreachable)?;
            return Ok(match validation {
                ValidationMode::Strict => Timebase::Stepped { now },
                ValidationMode::Partitioned => Timebase::Frozen { now },
            });
        }
        let t0 = local_ms();
        let remote = driver.now_ms().map_err(unreachable)? as i64;
        let t1 = local_ms();
        Ok(Timebase::Wall { offset: remote - (t0 + t1) / 2, slack: ((t1 - t0) / 2 + 2) as u64 })
    }

    fn before(&self) -> u64 {
        match *self {
            Timebase::Stepped { now } | Timebase::Frozen { now } => now,
            Timebase::Wall { offset, slack } => ((local_ms() + offset).max(0) as u64).saturating_sub(slack),
        }
    }

    fn after(&self) -> u64 {
        match *self {
            Timebase::Stepped { now } | Timebase::Frozen { now } => now,
            Timebase::Wall { offset, slack } => (local_ms() + offset).max(0) as u64 + slack,
        }
    }
}

#[derive(Debug, Default)]
struct WorkerOutput {
    workloads: Vec<RawWorkload>,
    load_mismatches: u64,
    reap_mismatches: u64,
}

struct Shared<'a> {
    driver: &'a dyn BackendDriver,
    cfg: &'a RunConfig,
    logical: bool,
    audit_fresh: bool,
    barrier: Barrier,
    abort: AtomicBool,
    aborted_in: Mutex<Option<WorkloadName>>,
    space: Mutex<Option<SpaceStats>>,
    load_error: Mutex<Option<String>>,
}

/// Loads (unless preloaded) and runs every configured workload in order,
/// validating each response against a shadow oracle.
pub fn run(driver: &dyn BackendDriver, cfg: &RunConfig) -> Result<RunOutcome, BenchError> {
    cfg.validate()?;
    let start_stats = driver.stats().map_err(|e| BenchError::DriverUnreachable(e.to_string()))?;
    if cfg.validation == ValidationMode::Strict && !start_stats.logical_clock {
        return Err(BenchError::Config("strict validation needs a backend on a logical clock".into()));
    }
    let audit_fresh = !cfg.preloaded && start_stats.audit_entries == 0 && start_stats.space.records == 0;
    let workers = cfg.workers();
    let shared = Shared {
        driver,
        cfg,
        logical: start_stats.logical_clock,
        audit_fresh,
        barrier: Barrier::new(workers),
        abort: AtomicBool::new(false),
        aborted_in: Mutex::new(None),
        space: Mutex::new(None),
        load_error: Mutex::new(None),
    };
    let load_started = Instant::now();
    let load_ms = Mutex::new(0.0f64);
    let outputs: Vec<Result<WorkerOutput, BenchError>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let shared = &shared;
                let load_ms = &load_ms;
                s.spawn(move || worker(shared, w, load_started, load_ms))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut merged = vec![RawWorkload::default(); cfg.workloads.len()];
    let (mut load_mismatches, mut reap_mismatches) = (0, 0);
    for out in outputs {
        let out = out?;
        load_mismatches += out.load_mismatches;
        reap_mismatches += out.reap_mismatches;
        for (slot, raw) in merged.iter_mut().zip(out.workloads) {
            slot.name = raw.name;
            slot.samples.extend(raw.samples);
            slot.busy_us.extend(raw.busy_us);
            slot.fillers += raw.fillers;
        }
    }
    if let Some(e) = shared.load_error.lock().take() {
        return Err(BenchError::Load(e));
    }
    let mut space = *shared.space.lock();
    if space.is_none() {
        space = Some(driver.stats().map_err(|e| BenchError::DriverUnreachable(e.to_string()))?.space);
    }
    let metrics = compute_metrics(&merged, space);
    let counters = [("load_mismatches", load_mismatches), ("reap_mismatches", reap_mismatches)];
    let report = Report::build(&cfg.config_lines(driver.name()), &metrics, &counters, *load_ms.lock());
    let samples = merged.into_iter().flat_map(|w| w.samples).collect();
    let outcome = RunOutcome { report, metrics, samples, load_mismatches, reap_mismatches };
    if let Some(workload) = *shared.aborted_in.lock() {
        let correctness = outcome.metrics.correctness_pct;
        return Err(BenchError::ValidationAbort { workload, correctness, outcome: Box::new(outcome) });
    }
    Ok(outcome)
}

fn worker(sh: &Shared<'_>, w: usize, load_started: Instant, load_ms: &Mutex<f64>) -> Result<WorkerOutput, BenchError> {
    let cfg = sh.cfg;
    let driver = sh.driver;
    let mut out = WorkerOutput::default();
    let mut gen = Generator::new(&cfg.load, w, cfg.seed);
    if let Some(n) = cfg.active_users {
        gen.set_active_users(n);
    }
    gen.set_misuse_share(cfg.misuse_share);
    let mut time = match Timebase::sync(driver, sh.logical, cfg.validation) {
        Ok(t) => t,
        Err(e) => {
            // Keep the barrier schedule intact for the other workers.
            *sh.load_error.lock() = Some(e.to_string());
            sh.abort.store(true, Ordering::Relaxed);
            Timebase::Frozen { now: 0 }
        }
    };
    let partition = (workers_of(cfg) > 1).then_some((w, workers_of(cfg)));
    let mut oracle = Oracle::new(OracleConfig {
        explicit_reaping: matches!(time, Timebase::Stepped { .. } | Timebase::Frozen { .. }),
        audit: (cfg.validation == ValidationMode::Strict && sh.audit_fresh).then_some(true),
        partition,
        features: None,
    });

    // Load phase.
    let load_window = Window { before: time.before(), after: time.after() };
    let ops = gen.load_ops(load_window.before);
    if cfg.preloaded {
        for op in &ops {
            if let crate::api::GdprQuery::CreateRecord(r) = &op.query {
                oracle.assume_loaded(r.clone(), Window { before: 0, after: load_window.after });
            }
        }
    } else if !sh.abort.load(Ordering::Relaxed) {
        for op in &ops {
            let b = time.before();
            let got = driver.execute(&op.role, &op.query);
            let win = Window { before: b, after: time.after() };
            if !oracle.observe(&op.role, &op.query, win, &got) {
                out.load_mismatches += 1;
                let mut slot = sh.load_error.lock();
                if slot.is_none() {
                    *slot = Some(format!("{} -> {}", op.line(), response_class(&got)));
                }
            }
        }
    }
    sh.barrier.wait();
    if w == 0 {
        *load_ms.lock() = load_started.elapsed().as_secs_f64() * 1000.0;
    }
    if sh.load_error.lock().is_some() {
        return Ok(out);
    }
    if cfg.validation == ValidationMode::Strict && sh.audit_fresh {
        // Every load call was audited, or none was when auditing is off.
        let entries = driver.stats().map_err(|e| BenchError::DriverUnreachable(e.to_string()))?.audit_entries;
        oracle.adopt_audit(entries > 0);
    }
    gen.begin_run(time.before());
    let mut next_reap = time.before() + cfg.reap_interval_ms;
    let (mut attempted, mut matched) = (0u64, 0u64);

    for spec in &cfg.workloads {
        let n = share_of(spec.operation_count, workers_of(cfg), w);
        let fillers_before = gen.stats().fillers;
        let mut raw = RawWorkload { name: Some(spec.name), ..Default::default() };
        let mut busy = 0u64;
        sh.barrier.wait();
        let started = Instant::now();
        for _ in 0..n {
            if sh.abort.load(Ordering::Relaxed) {
                break;
            }
            if let Timebase::Stepped { now } = &mut time {
                if cfg.tick_ms > 0 {
                    driver.advance(cfg.tick_ms).map_err(|e| BenchError::DriverUnreachable(e.to_string()))?;
                    *now += cfg.tick_ms;
                }
                while *now >= next_reap {
                    let got = driver.reap().map_err(|e| BenchError::DriverUnreachable(e.to_string()))?;
                    if got != oracle.reap(*now) {
                        out.reap_mismatches += 1;
                    }
                    next_reap += cfg.reap_interval_ms;
                }
            }
            let b = time.before();
            let op = gen.next_operation(spec, b);
            let t0 = Instant::now();
            let got = driver.execute(&op.role, &op.query);
            let span = t0.elapsed();
            let win = Window { before: b, after: time.after() };
            let ok = oracle.observe(&op.role, &op.query, win, &got);
            if !ok {
                log::debug!("mismatch: {} -> {:?}", op.line(), got.as_ref().map(|r| r.to_lines()));
            }
            busy += span.as_micros() as u64;
            raw.samples.push(OpSample {
                worker: w,
                workload: spec.name,
                template: op.template,
                op: op.query.op_name(),
                start_us: t0.duration_since(started).as_micros() as u64,
                latency_us: span.as_micros() as u64,
                class: response_class(&got),
                matched: ok,
            });
            attempted += 1;
            matched += ok as u64;
            if attempted >= 100 && 100.0 * (matched as f64) < cfg.abort_below_pct * attempted as f64 {
                sh.abort.store(true, Ordering::Relaxed);
                sh.aborted_in.lock().get_or_insert(spec.name);
            }
        }
        raw.busy_us.push(busy);
        raw.fillers = gen.stats().fillers - fillers_before;
        out.workloads.push(raw);
        sh.barrier.wait();
        if w == 0 && spec.name == WorkloadName::Controller {
            let stats = driver.stats().map_err(|e| BenchError::DriverUnreachable(e.to_string()))?;
            *sh.space.lock() = Some(stats.space);
        }
        sh.barrier.wait();
        if sh.abort.load(Ordering::Relaxed) {
            break;
        }
    }
    Ok(out)
}

fn workers_of(cfg: &RunConfig) -> usize {
    cfg.workers()
}

/// Ops of a workload handled by worker `w`.
fn share_of(total: usize, workers: usize, w: usize) -> usize {
    total / workers + usize::from(w < total % workers)
}
