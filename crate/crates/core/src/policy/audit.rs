//! Append-only audit trail.
//!
//! Every executed query, including denied and failed ones, becomes exactly
//! one entry. Entries are totally ordered by `seq` and timestamps never
//! decrease along that order, so time-range lookups are binary searches.
//! On disk each entry is one line: `seq|timestamp_ms|role|actor|op|selector|outcome|count`.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use parking_lot::Mutex;

use crate::error::{Error, ErrorCode, Result};
use crate::store::Erased;

pub const AUDIT_FILE: &str = "audit.log";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Ok,
    Denied,
    Failed(ErrorCode),
}

impl Outcome {
    pub fn of<T>(result: &Result<T>) -> Outcome {
        match result {
            Ok(_) => Outcome::Ok,
            Err(Error::Denied(_)) => Outcome::Denied,
            Err(e) => Outcome::Failed(e.code()),
        }
    }

    pub fn parse(s: &str) -> Option<Outcome> {
        match s {
            "OK" => Some(Outcome::Ok),
            "DENIED" => Some(Outcome::Denied),
            other => ErrorCode::parse(other).map(Outcome::Failed),
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Ok => f.write_str("OK"),
            Outcome::Denied => f.write_str("DENIED"),
            Outcome::Failed(c) => f.write_str(c.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AuditEntry {
    pub seq: u64,
    pub timestamp_ms: u64,
    pub role: String,
    pub actor: String,
    pub op: String,
    pub selector: String,
    pub outcome: Outcome,
    pub count: u64,
}

impl AuditEntry {
    pub fn to_line(&self) -> String {
        format!(
            "{}|{}|{}|{}|{}|{}|{}|{}",
            self.seq, self.timestamp_ms, self.role, self.actor, self.op, self.selector, self.outcome, self.count
        )
    }

    /// Inverse of [`AuditEntry::to_line`]. The selector is the only field
    /// that may contain `|`, so it is whatever lies between the fifth and the
    /// second-to-last separators.
    pub fn parse_line(line: &str) -> Option<AuditEntry> {
        let mut left = line.splitn(6, '|');
        let seq = left.next()?.parse().ok()?;
        let timestamp_ms = left.next()?.parse().ok()?;
        let role = left.next()?.to_string();
        let actor = left.next()?.to_string();
        let op = left.next()?.to_string();
        let rest = left.next()?;
        let mut right = rest.rsplitn(3, '|');
        let count = right.next()?.parse().ok()?;
        let outcome = Outcome::parse(right.next()?)?;
        let selector = right.next()?.to_string();
        Some(AuditEntry { seq, timestamp_ms, role, actor, op, selector, outcome, count })
    }
}

impl fmt::Display for AuditEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_line())
    }
}

/// An entry before it is sequenced.
#[derive(Debug, Clone)]
pub struct PendingEntry<'a> {
    pub timestamp_ms: u64,
    pub role: &'a str,
    pub actor: &'a str,
    pub op: &'a str,
    pub selector: &'a str,
    pub outcome: Outcome,
    pub count: u64,
    /// Key named by the query, if any; used to recognise known keys.
    pub key: Option<&'a str>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DeletionStatus {
    pub erased: bool,
    pub deletion_seq: Option<u64>,
    /// Erasure time minus the instant erasure became due.
    pub latency_ms: Option<u64>,
}

#[derive(Debug, Clone, Copy)]
struct ErasureRecord {
    seq: u64,
    erased_at: u64,
    due_ms: u64,
}

#[derive(Debug, Default)]
struct Inner {
    entries: Vec<AuditEntry>,
    next_seq: u64,
    last_ts: u64,
    file: Option<BufWriter<File>>,
    erasures: HashMap<String, ErasureRecord>,
    known: HashSet<String>,
}

/// The audit trail plus the erasure register backing deletion checks.
///
/// With auditing disabled no entries are kept, but the erasure register and
/// known-key set are still maintained so deletion checks keep working.
#[derive(Debug)]
pub struct AuditLog {
    inner: Mutex<Inner>,
    enabled: bool,
}

impl AuditLog {
    pub fn in_memory(enabled: bool) -> Self {
        AuditLog { inner: Mutex::new(Inner { next_seq: 1, ..Default::default() }), enabled }
    }

    /// Opens `dir/audit.log`, restoring previously written entries.
    pub fn open(dir: &Path, enabled: bool) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(AUDIT_FILE);
        let log = AuditLog::in_memory(enabled);
        {
            let mut inner = log.inner.lock();
            if path.exists() {
                for line in BufReader::new(File::open(&path)?).lines() {
                    let line = line?;
                    if line.is_empty() {
                        continue;
                    }
                    let entry = AuditEntry::parse_line(&line)
                        .ok_or_else(|| Error::Storage(format!("corrupt audit line {line:?}")))?;
                    if let Some(k) = entry.selector.strip_prefix("KEY=") {
                        inner.known.insert(k.split(' ').next().unwrap_or(k).to_string());
                    }
                    inner.next_seq = entry.seq + 1;
                    inner.last_ts = inner.last_ts.max(entry.timestamp_ms);
                    inner.entries.push(entry);
                }
            }
            if enabled {
                let file = OpenOptions::new().create(true).append(true).open(&path)?;
                inner.file = Some(BufWriter::new(file));
            }
        }
        Ok(log)
    }

    pub fn enabled(&self) -> bool {
        self.enabled
    }

    /// Sequences and stores one entry, registering `erasures` as happening at
    /// the entry's timestamp. Returns the entry's seq (0 when disabled). The
    /// entry reaches the file before this returns.
    pub fn append(&self, pending: PendingEntry<'_>, erasures: &[Erased]) -> Result<u64> {
        let mut inner = self.inner.lock();
        let ts = pending.timestamp_ms.max(inner.last_ts);
        let seq = if self.enabled { inner.next_seq } else { 0 };
        if let Some(k) = pending.key {
            if !inner.known.contains(k) {
                inner.known.insert(k.to_string());
            }
        }
        for e in erasures {
            inner.known.insert(e.key.clone());
            inner.erasures.insert(e.key.clone(), ErasureRecord { seq, erased_at: ts, due_ms: e.due_ms });
        }
        if !self.enabled {
            return Ok(0);
        }
        let entry = AuditEntry {
            seq,
            timestamp_ms: ts,
            role: pending.role.to_string(),
            actor: pending.actor.to_string(),
            op: pending.op.to_string(),
            selector: pending.selector.to_string(),
            outcome: pending.outcome,
            count: pending.count,
        };
        if let Some(file) = inner.file.as_mut() {
            writeln!(file, "{}", entry.to_line())?;
            file.flush()?;
        }
        inner.entries.push(entry);
        inner.next_seq += 1;
        inner.last_ts = ts;
        Ok(seq)
    }

    pub fn len(&self) -> usize {
        self.inner.lock().entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entries(&self) -> Vec<AuditEntry> {
        self.inner.lock().entries.clone()
    }

    /// Entries with `start <= timestamp <= end`, in seq order.
    pub fn get_system_logs(&self, start: u64, end: u64) -> Result<Vec<AuditEntry>> {
        if start > end {
            return Err(Error::InvalidRange { start, end });
        }
        let inner = self.inner.lock();
        let lo = inner.entries.partition_point(|e| e.timestamp_ms < start);
        let hi = inner.entries.partition_point(|e| e.timestamp_ms <= end);
        Ok(inner.entries[lo..hi.max(lo)].to_vec())
    }

    /// `present` says whether the store still holds `key`.
    pub fn verify_deletion(&self, key: &str, present: bool) -> Result<DeletionStatus> {
        let inner = self.inner.lock();
        if !inner.known.contains(key) {
            return Err(Error::UnknownKey(key.to_string()));
        }
        match inner.erasures.get(key) {
            Some(r) if !present => Ok(DeletionStatus {
                erased: true,
                deletion_seq: Some(r.seq),
                latency_ms: Some(r.erased_at.saturating_sub(r.due_ms)),
            }),
            _ => Ok(DeletionStatus { erased: false, deletion_seq: None, latency_ms: None }),
        }
    }

    /// Bytes the trail occupies in its line form.
    pub fn bytes(&self) -> u64 {
        self.inner.lock().entries.iter().map(|e| e.to_line().len() as u64 + 1).sum()
    }
}
