//! Python bindings for the gdprkv store: the embedded engine, the record
//! codec, the rank sampler and the benchmark runner.

use std::collections::BTreeMap;
use std::sync::Arc;

use gdprkv::api::{EmbeddedDriver, Engine as CoreEngine, GdprQuery};
use gdprkv::bench::{self, BenchError, RunConfig, ValidationMode};
use gdprkv::clock::ClockMode;
use gdprkv::policy::Role;
use gdprkv::record::{self, Metadata, PersonalRecord, ValueSet};
use gdprkv::store::{IndexSet, Selector, StoreConfig};
use gdprkv::workload::{zipf_pmf, DistributionKind, Properties, RankSampler};
use gdprkv::ErrorCode;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

create_exception!(gdprkv, GdprError, PyException, "A query was rejected by the store.");
create_exception!(gdprkv, DeniedError, GdprError, "The role may not issue this query.");
create_exception!(gdprkv, NotFoundError, GdprError, "No live record has this key.");

fn to_py(e: gdprkv::Error) -> PyErr {
    let msg = format!("{}: {e}", e.code().as_str());
    match e.code() {
        ErrorCode::Denied => DeniedError::new_err(msg),
        ErrorCode::NotFound => NotFoundError::new_err(msg),
        _ => GdprError::new_err(msg),
    }
}

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// One personal record: a key, an opaque data field and its seven
/// metadata attributes. Multi-valued attributes are lists.
#[pyclass(name = "Record", get_all, set_all, from_py_object)]
#[derive(Clone)]
struct PyRecord {
    key: String,
    data: String,
    pur: Vec<String>,
    ttl: u64,
    usr: String,
    obj: Vec<String>,
    dec: Vec<String>,
    shr: Vec<String>,
    src: Vec<String>,
}

fn set(v: &[String]) -> ValueSet {
    v.iter().cloned().collect()
}

fn list(v: &ValueSet) -> Vec<String> {
    v.iter().cloned().collect()
}

impl PyRecord {
    fn to_core(&self) -> PersonalRecord {
        let meta = Metadata {
            pur: set(&self.pur),
            ttl: self.ttl,
            usr: self.usr.clone(),
            obj: set(&self.obj),
            dec: set(&self.dec),
            shr: set(&self.shr),
            src: set(&self.src),
        };
        PersonalRecord::new(self.key.clone(), self.data.clone(), meta)
    }

    fn from_core(r: &PersonalRecord) -> Self {
        PyRecord {
            key: r.key.clone(),
            data: r.data.clone(),
            pur: list(&r.meta.pur),
            ttl: r.meta.ttl,
            usr: r.meta.usr.clone(),
            obj: list(&r.meta.obj),
            dec: list(&r.meta.dec),
            shr: list(&r.meta.shr),
            src: list(&r.meta.src),
        }
    }
}

#[pymethods]
impl PyRecord {
    #[new]
    #[pyo3(signature = (key, data, usr, ttl, pur=vec![], obj=vec![], dec=vec![], shr=vec![], src=vec![]))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        key: String,
        data: String,
        usr: String,
        ttl: u64,
        pur: Vec<String>,
        obj: Vec<String>,
        dec: Vec<String>,
        shr: Vec<String>,
        src: Vec<String>,
    ) -> PyResult<Self> {
        let r = PyRecord { key, data, pur, ttl, usr, obj, dec, shr, src };
        r.to_core().validate().map_err(value_err)?;
        Ok(r)
    }

    /// Parses a `key;data;PUR=..;...;SRC=..;` line.
    #[staticmethod]
    fn parse(line: &str) -> PyResult<Self> {
        record::parse_record(line).map(|r| PyRecord::from_core(&r)).map_err(value_err)
    }

    fn to_line(&self) -> PyResult<String> {
        let r = self.to_core();
        r.validate().map_err(value_err)?;
        Ok(r.to_line())
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.to_core() == other.to_core()
    }

    fn __repr__(&self) -> String {
        format!("Record({:?})", self.to_core().to_line())
    }
}

/// An in-process store behind the access-control layer.
///
/// With `clock="logical"` time only moves through `advance` and expired
/// records are erased by `reap`. With `clock="wall"` a background reaper
/// runs every `reap_interval_ms`.
#[pyclass(name = "Engine")]
struct PyEngine {
    engine: Arc<CoreEngine>,
}

#[pymethods]
impl PyEngine {
    #[new]
    #[pyo3(signature = (indices="all", audit=true, clock="logical", reap_interval_ms=500))]
    fn new(indices: &str, audit: bool, clock: &str, reap_interval_ms: u64) -> PyResult<Self> {
        let config = StoreConfig {
            index_attributes: indices.parse::<IndexSet>().map_err(value_err)?,
            audit,
            clock_mode: clock.parse::<ClockMode>().map_err(value_err)?,
            reap_interval_ms,
            ..StoreConfig::default()
        };
        config.validate().map_err(value_err)?;
        let engine = Arc::new(CoreEngine::open(config).map_err(to_py)?);
        if !engine.is_logical() {
            engine.start_reaper();
        }
        Ok(PyEngine { engine })
    }

    /// Runs one query, e.g. `execute("controller", "READ-DATA-BY-USR", "neo")`.
    /// Returns the response lines; rejected queries raise a `GdprError`.
    #[pyo3(signature = (role, op, args=""))]
    fn execute(&self, py: Python<'_>, role: &str, op: &str, args: &str) -> PyResult<Vec<String>> {
        let role: Role = role.parse().map_err(to_py)?;
        let query = GdprQuery::parse(op, args).map_err(to_py)?;
        let engine = &self.engine;
        py.detach(|| engine.execute(&role, &query)).map(|r| r.to_lines()).map_err(to_py)
    }

    /// Creates `record` as the controller.
    fn put(&self, record: &PyRecord) -> PyResult<()> {
        let query = GdprQuery::CreateRecord(record.to_core());
        self.engine.execute(&Role::Controller, &query).map(|_| ()).map_err(to_py)
    }

    /// Reads the live record under `key` as the controller.
    fn get(&self, key: &str) -> PyResult<PyRecord> {
        let sel = Selector::Key(key.to_string());
        let found = self.engine.store().read_records(&sel, self.engine.now_ms()).map_err(to_py)?;
        Ok(PyRecord::from_core(&found[0]))
    }

    fn __len__(&self) -> usize {
        self.engine.store().len()
    }

    #[getter]
    fn now_ms(&self) -> u64 {
        self.engine.now_ms()
    }

    /// Moves a logical clock forward. Fails on a wall clock.
    fn advance(&self, ms: u64) -> PyResult<()> {
        if self.engine.advance(ms) {
            Ok(())
        } else {
            Err(PyValueError::new_err("engine runs on a wall clock"))
        }
    }

    /// Erases every expired record now; returns how many went.
    fn reap(&self) -> PyResult<usize> {
        self.engine.reap().map_err(to_py)
    }

    fn features(&self) -> BTreeMap<String, String> {
        self.engine.features().iter().map(|(c, s)| (c.name().to_string(), s.name().to_string())).collect()
    }

    /// Record count, personal bytes, total bytes and their ratio.
    fn space_stats(&self) -> BTreeMap<&'static str, f64> {
        let s = self.engine.space_stats();
        BTreeMap::from([
            ("records", s.records as f64),
            ("personal_data_bytes", s.personal_data_bytes as f64),
            ("total_db_bytes", s.total_db_bytes as f64),
            ("space_factor", s.space_factor),
        ])
    }

    fn audit_len(&self) -> usize {
        self.engine.audit().len()
    }
}

/// Seeded sampler of ranks `1..=n`, Zipf(`theta`) or uniform.
#[pyclass(name = "ZipfSampler")]
struct PyZipfSampler {
    sampler: RankSampler,
    theta: Option<f64>,
    rng: ChaCha8Rng,
}

#[pymethods]
impl PyZipfSampler {
    /// `theta=None` samples uniformly.
    #[new]
    #[pyo3(signature = (n, theta=Some(gdprkv::workload::DEFAULT_THETA), seed=0))]
    fn new(n: usize, theta: Option<f64>, seed: u64) -> PyResult<Self> {
        let kind = theta.map_or(DistributionKind::Uniform, |theta| DistributionKind::Zipf { theta });
        let sampler = RankSampler::new(kind, n).map_err(value_err)?;
        Ok(PyZipfSampler { sampler, theta, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    fn sample(&mut self) -> usize {
        self.sampler.sample(&mut self.rng)
    }

    fn sample_many(&mut self, count: usize) -> Vec<usize> {
        (0..count).map(|_| self.sampler.sample(&mut self.rng)).collect()
    }

    /// Probability of rank `i`.
    fn pmf(&self, i: usize) -> f64 {
        let n = self.sampler.n();
        match self.theta {
            _ if i == 0 || i > n => 0.0,
            None => 1.0 / n as f64,
            Some(theta) => zipf_pmf(i, n, theta),
        }
    }
}

/// Loads and runs workloads on a fresh embedded store, configured by the
/// same `key=value` properties the command line accepts. Returns a dict
/// with `correctness_pct`, `completion_ms` per workload, `space_factor`
/// and the rendered `report`.
#[pyfunction]
#[pyo3(signature = (properties=BTreeMap::new()))]
fn run_benchmark(py: Python<'_>, properties: BTreeMap<String, String>) -> PyResult<Py<PyAny>> {
    let mut props = Properties::new();
    for (k, v) in &properties {
        props.set(k, v).map_err(value_err)?;
    }
    let cfg = RunConfig::from_properties(&props).map_err(value_err)?;
    let strict = cfg.validation == ValidationMode::Strict;
    let store = StoreConfig {
        index_attributes: props.get_or("indices", IndexSet::all()).map_err(value_err)?,
        audit: props.get_or("audit", true).map_err(value_err)?,
        reap_interval_ms: props.get_or("reap_interval_ms", 500u64).map_err(value_err)?,
        clock_mode: if strict { ClockMode::Logical } else { ClockMode::Wall },
        ..StoreConfig::default()
    };
    let engine = Arc::new(CoreEngine::open(store).map_err(to_py)?);
    if !strict {
        engine.start_reaper();
    }
    let driver = EmbeddedDriver::new(engine);
    let outcome = match py.detach(|| bench::run(&driver, &cfg)) {
        Ok(out) => out,
        Err(BenchError::ValidationAbort { outcome, .. }) => *outcome,
        Err(e) => return Err(GdprError::new_err(e.to_string())),
    };
    let m = &outcome.metrics;
    let completion: BTreeMap<String, f64> = m.workloads.iter().map(|w| (w.name.to_string(), w.completion_ms)).collect();
    let out = pyo3::types::PyDict::new(py);
    out.set_item("correctness_pct", m.correctness_pct)?;
    out.set_item("completion_ms", completion)?;
    out.set_item("space_factor", m.space_factor())?;
    out.set_item("report", outcome.report.render())?;
    Ok(out.into_any().unbind())
}

#[pymodule]
#[pyo3(name = "gdprkv")]
pub fn gdprkv_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRecord>()?;
    m.add_class::<PyEngine>()?;
    m.add_class::<PyZipfSampler>()?;
    m.add_function(wrap_pyfunction!(run_benchmark, m)?)?;
    m.add("GdprError", m.py().get_type::<GdprError>())?;
    m.add("DeniedError", m.py().get_type::<DeniedError>())?;
    m.add("NotFoundError", m.py().get_type::<NotFoundError>())?;
    Ok(())
}
