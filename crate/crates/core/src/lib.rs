//! Personal-data store with strict TTL erasure, an audit trail, metadata
//! indexing and role-based access control, plus a benchmark harness that
//! drives it with controller, customer, processor and regulator workloads.

pub mod api;
pub mod bench;
pub mod cli;
pub mod clock;
pub mod error;
pub mod policy;
pub mod record;
pub mod store;
pub mod workload;

pub use error::{Error, ErrorCode, Result};
