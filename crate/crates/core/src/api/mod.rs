//! Query surface: typed queries, responses, the engine that binds policy to
//! storage, and the drivers the benchmark talks to.

pub mod driver;
pub mod engine;
pub mod features;
pub mod query;
pub mod remote;
pub mod server;
pub mod wire;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::policy::{AuditEntry, DeletionStatus};
use crate::record::{parse_metadata_line, parse_record, serialize_metadata, Metadata, PersonalRecord};

pub use driver::{BackendDriver, DriverStats, EmbeddedDriver};
pub use engine::Engine;
pub use features::{Capability, FeatureReport, Support};
pub use query::{Dimension, Family, GdprQuery};
pub use remote::RemoteDriver;
pub use server::Server;

#[derive(Debug, Clone, PartialEq)]
pub enum QueryResponse {
    /// Writes and deletes: number of records touched.
    Ack {
        count: u64,
    },
    Records(Vec<Arc<PersonalRecord>>),
    /// Metadata reads: `(key, metadata)`, never the data payload.
    Metadata(Vec<(String, Metadata)>),
    Logs(Vec<AuditEntry>),
    Features(FeatureReport),
    Deletion(DeletionStatus),
}

/// What a regulator can ever be given. There is no variant that carries a
/// data payload.
#[derive(Debug, Clone, PartialEq)]
pub enum RegulatorResponse {
    Metadata(Vec<(String, Metadata)>),
    Logs(Vec<AuditEntry>),
    Features(FeatureReport),
    Deletion(DeletionStatus),
}

impl From<RegulatorResponse> for QueryResponse {
    fn from(r: RegulatorResponse) -> Self {
        match r {
            RegulatorResponse::Metadata(m) => QueryResponse::Metadata(m),
            RegulatorResponse::Logs(l) => QueryResponse::Logs(l),
            RegulatorResponse::Features(f) => QueryResponse::Features(f),
            RegulatorResponse::Deletion(d) => QueryResponse::Deletion(d),
        }
    }
}

impl QueryResponse {
    /// Result size recorded as the audit entry's count.
    pub fn count(&self) -> u64 {
        match self {
            QueryResponse::Ack { count } => *count,
            QueryResponse::Records(r) => r.len() as u64,
            QueryResponse::Metadata(m) => m.len() as u64,
            QueryResponse::Logs(l) => l.len() as u64,
            QueryResponse::Features(_) => 5,
            QueryResponse::Deletion(_) => 1,
        }
    }

    /// Canonical result lines, as sent on the wire.
    pub fn to_lines(&self) -> Vec<String> {
        match self {
            QueryResponse::Ack { count } => vec![format!("COUNT {count}")],
            QueryResponse::Records(rs) => rs.iter().map(|r| r.to_line()).collect(),
            QueryResponse::Metadata(ms) => ms.iter().map(|(k, m)| serialize_metadata(k, m)).collect(),
            QueryResponse::Logs(es) => es.iter().map(AuditEntry::to_line).collect(),
            QueryResponse::Features(f) => f.to_lines(),
            QueryResponse::Deletion(d) => vec![deletion_line(d)],
        }
    }

    /// Rebuilds a response from its lines; the query decides the shape.
    /// Record creation times are not part of the line form and come back as 0.
    pub fn from_lines(query: &GdprQuery, lines: &[String]) -> Result<QueryResponse> {
        let bad = |what: &str| Error::Malformed(format!("bad {what} in response"));
        let resp = match query {
            GdprQuery::ReadData(_) => QueryResponse::Records(
                lines
                    .iter()
                    .map(|l| parse_record(l).map(Arc::new).map_err(|_| bad("record line")))
                    .collect::<Result<_>>()?,
            ),
            GdprQuery::ReadMetadata(_) => QueryResponse::Metadata(
                lines
                    .iter()
                    .map(|l| parse_metadata_line(l).map_err(|_| bad("metadata line")))
                    .collect::<Result<_>>()?,
            ),
            GdprQuery::GetSystemLogs { .. } => QueryResponse::Logs(
                lines
                    .iter()
                    .map(|l| AuditEntry::parse_line(l).ok_or_else(|| bad("audit line")))
                    .collect::<Result<_>>()?,
            ),
            GdprQuery::GetSystemFeatures => {
                QueryResponse::Features(FeatureReport::from_lines(lines).map_err(|_| bad("feature line"))?)
            }
            GdprQuery::VerifyDeletion(_) => {
                let [line] = lines else { return Err(bad("deletion status")) };
                QueryResponse::Deletion(parse_deletion_line(line).ok_or_else(|| bad("deletion status"))?)
            }
            GdprQuery::CreateRecord(_)
            | GdprQuery::DeleteRecord(_)
            | GdprQuery::UpdateData { .. }
            | GdprQuery::UpdateMetadata { .. } => {
                let [line] = lines else { return Err(bad("count")) };
                let count = line.strip_prefix("COUNT ").and_then(|n| n.parse().ok()).ok_or_else(|| bad("count"))?;
                QueryResponse::Ack { count }
            }
        };
        Ok(resp)
    }
}

fn deletion_line(d: &DeletionStatus) -> String {
    let opt = |v: Option<u64>| v.map_or_else(|| "-".to_string(), |n| n.to_string());
    format!("ERASED={};SEQ={};LATENCY={};", d.erased, opt(d.deletion_seq), opt(d.latency_ms))
}

fn parse_deletion_line(line: &str) -> Option<DeletionStatus> {
    let mut erased = None;
    let mut seq = None;
    let mut latency = None;
    for field in line.trim_end_matches(';').split(';') {
        let (k, v) = field.split_once('=')?;
        let opt = || if v == "-" { Some(None) } else { v.parse().ok().map(Some) };
        match k {
            "ERASED" => erased = v.parse().ok(),
            "SEQ" => seq = opt(),
            "LATENCY" => latency = opt(),
            _ => return None,
        }
    }
    Some(DeletionStatus { erased: erased?, deletion_seq: seq?, latency_ms: latency? })
}

/// Coarse classification used to compare drivers: `OK` or the error code.
pub fn response_class(result: &Result<QueryResponse>) -> String {
    match result {
        Ok(_) => "OK".to_string(),
        Err(e) => e.code().as_str().to_string(),
    }
}
