use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

/// Millisecond time source.
pub trait Clock: Send + Sync + std::fmt::Debug {
    fn now_ms(&self) -> u64;

    /// Moves a logical clock forward. Wall clocks ignore this and return false.
    fn advance(&self, _ms: u64) -> bool {
        false
    }

    fn is_logical(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClockMode {
    Wall,
    Logical,
}

impl FromStr for ClockMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "wall" => Ok(ClockMode::Wall),
            "logical" => Ok(ClockMode::Logical),
            other => Err(format!("unknown clock mode {other:?}")),
        }
    }
}

impl ClockMode {
    pub fn build(self) -> Arc<dyn Clock> {
        match self {
            ClockMode::Wall => Arc::new(WallClock::new()),
            ClockMode::Logical => Arc::new(LogicalClock::new(0)),
        }
    }
}

/// Epoch milliseconds, anchored once and advanced by a monotonic timer so
/// readings never go backwards.
#[derive(Debug)]
pub struct WallClock {
    anchor_ms: u64,
    started: Instant,
}

impl WallClock {
    pub fn new() -> Self {
        let anchor_ms = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0);
        WallClock { anchor_ms, started: Instant::now() }
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn now_ms(&self) -> u64 {
        self.anchor_ms + self.started.elapsed().as_millis() as u64
    }
}

/// Clock that only moves when told to.
#[derive(Debug, Default)]
pub struct LogicalClock {
    now: AtomicU64,
}

impl LogicalClock {
    pub fn new(start_ms: u64) -> Self {
        LogicalClock { now: AtomicU64::new(start_ms) }
    }

    pub fn set(&self, ms: u64) {
        self.now.fetch_max(ms, Ordering::SeqCst);
    }
}

impl Clock for LogicalClock {
    fn now_ms(&self) -> u64 {
        self.now.load(Ordering::SeqCst)
    }

    fn advance(&self, ms: u64) -> bool {
        self.now.fetch_add(ms, Ordering::SeqCst);
        true
    }

    fn is_logical(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logical_clock_moves_only_on_advance() {
        let c = LogicalClock::new(10);
        assert_eq!(c.now_ms(), 10);
        assert!(c.advance(5));
        assert_eq!(c.now_ms(), 15);
        c.set(12);
        assert_eq!(c.now_ms(), 15);
    }

    #[test]
    fn wall_clock_is_monotone() {
        let c = WallClock::new();
        let a = c.now_ms();
        let b = c.now_ms();
        assert!(b >= a);
        assert!(!c.advance(100));
    }
}
