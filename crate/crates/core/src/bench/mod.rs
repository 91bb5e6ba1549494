//! Benchmark harness: runs workloads against a driver, checks every response
//! against a shadow oracle and reports correctness, completion time and
//! space overhead.

pub mod metrics;
pub mod oracle;
pub mod report;
pub mod runner;

pub use metrics::{compute_metrics, correctness_pct, space_factor, MetricsReport, OpSample, WorkloadMetrics};
pub use oracle::{Oracle, OracleConfig, Window};
pub use report::{latency_csv, Report};
pub use runner::{run, BenchError, RunConfig, RunOutcome, ValidationMode};
