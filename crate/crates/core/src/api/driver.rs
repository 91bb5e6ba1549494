use std::sync::Arc;

use super::{Engine, GdprQuery, QueryResponse};
use crate::error::Result;
use crate::policy::Role;
use crate::store::SpaceStats;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriverStats {
    pub space: SpaceStats,
    pub audit_entries: u64,
    pub logical_clock: bool,
}

/// The operation surface the benchmark needs from a backend.
pub trait BackendDriver: Send + Sync {
    fn execute(&self, role: &Role, query: &GdprQuery) -> Result<QueryResponse>;

    fn now_ms(&self) -> Result<u64>;

    /// Moves the backend's logical clock. Returns false for wall clocks.
    fn advance(&self, ms: u64) -> Result<bool>;

    /// Runs one reaper pass and returns the number of records erased.
    fn reap(&self) -> Result<usize>;

    fn stats(&self) -> Result<DriverStats>;

    fn name(&self) -> &str;
}

/// In-process driver over the reference engine.
#[derive(Debug, Clone)]
pub struct EmbeddedDriver {
    engine: Arc<Engine>,
}

impl EmbeddedDriver {
    pub fn new(engine: Arc<Engine>) -> Self {
        EmbeddedDriver { engine }
    }

    pub fn engine(&self) -> &Arc<Engine> {
        &self.engine
    }
}

impl BackendDriver for EmbeddedDriver {
    fn execute(&self, role: &Role, query: &GdprQuery) -> Result<QueryResponse> {
        self.engine.execute(role, query)
    }

    fn now_ms(&self) -> Result<u64> {
        Ok(self.engine.now_ms())
    }

    fn advance(&self, ms: u64) -> Result<bool> {
        Ok(self.engine.advance(ms))
    }

    fn reap(&self) -> Result<usize> {
        self.engine.reap()
    }

    fn stats(&self) -> Result<DriverStats> {
        Ok(DriverStats {
            space: self.engine.space_stats(),
            audit_entries: self.engine.audit().len() as u64,
            logical_clock: self.engine.is_logical(),
        })
    }

    fn name(&self) -> &str {
        "embedded"
    }
}
