use crate::store::SpaceStats;
use crate::workload::{Template, WorkloadName};

/// One executed operation as seen by a worker.
#[derive(Debug, Clone, PartialEq)]
pub struct OpSample {
    pub worker: usize,
    pub workload: WorkloadName,
    pub template: Option<Template>,
    pub op: String,
    /// Start offset from the beginning of the workload, in microseconds.
    pub start_us: u64,
    pub latency_us: u64,
    /// `OK` or the error code.
    pub class: String,
    pub matched: bool,
}

/// Raw per-workload data collected by the runner.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawWorkload {
    pub name: Option<WorkloadName>,
    pub samples: Vec<OpSample>,
    /// Sum of driver-call spans per worker, in microseconds.
    pub busy_us: Vec<u64>,
    pub fillers: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadMetrics {
    pub name: WorkloadName,
    pub attempted: u64,
    pub succeeded: u64,
    pub denied: u64,
    pub errored: u64,
    pub matched: u64,
    pub fillers: u64,
    pub completion_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub correctness_pct: f64,
    pub workloads: Vec<WorkloadMetrics>,
    pub space: Option<SpaceStats>,
}

impl MetricsReport {
    pub fn attempted(&self) -> u64 {
        self.workloads.iter().map(|w| w.attempted).sum()
    }

    pub fn matched(&self) -> u64 {
        self.workloads.iter().map(|w| w.matched).sum()
    }

    pub fn space_factor(&self) -> Option<f64> {
        self.space.map(|s| s.space_factor)
    }

    pub fn workload(&self, name: WorkloadName) -> Option<&WorkloadMetrics> {
        self.workloads.iter().find(|w| w.name == name)
    }
}

/// `100 * matched / total`; an empty run is vacuously fully correct.
pub fn correctness_pct(matched: u64, total: u64) -> f64 {
    if total == 0 {
        100.0
    } else {
        100.0 * matched as f64 / total as f64
    }
}

/// Total footprint over personal-data payload.
pub fn space_factor(personal_bytes: f64, total_bytes: f64) -> f64 {
    if personal_bytes == 0.0 {
        1.0
    } else {
        total_bytes / personal_bytes
    }
}

/// Workers run in parallel, so a workload takes as long as its busiest worker.
pub fn completion_ms(busy_us: &[u64]) -> f64 {
    busy_us.iter().copied().max().unwrap_or(0) as f64 / 1000.0
}

pub fn compute_metrics(raw: &[RawWorkload], space: Option<SpaceStats>) -> MetricsReport {
    let workloads: Vec<WorkloadMetrics> = raw
        .iter()
        .filter_map(|w| {
            let name = w.name?;
            let count = |f: &dyn Fn(&OpSample) -> bool| w.samples.iter().filter(|s| f(s)).count() as u64;
            Some(WorkloadMetrics {
                name,
                attempted: w.samples.len() as u64,
                succeeded: count(&|s| s.class == "OK"),
                denied: count(&|s| s.class == "DENIED"),
                errored: count(&|s| s.class != "OK" && s.class != "DENIED"),
                matched: count(&|s| s.matched),
                fillers: w.fillers,
                completion_ms: completion_ms(&w.busy_us),
            })
        })
        .collect();
    let matched = workloads.iter().map(|w| w.matched).sum();
    let total = workloads.iter().map(|w| w.attempted).sum();
    MetricsReport { correctness_pct: correctness_pct(matched, total), workloads, space }
}
