//! Line protocol shared by [`super::Server`] and [`super::RemoteDriver`].
//!
//! ```text
//! HELLO <role>                      bind the session role     -> OK 0
//! REQ <role> <OP> <args...>         run a query               -> OK <n> + n lines | ERR <CODE> <message>
//! ADMIN STATS|NOW|REAP|ADVANCE <ms> harness control            -> OK 1 + one line
//! QUIT                              close the session
//! ```
//!
//! The role in a `REQ` line must equal the session role.

use std::io::{BufRead, Write};

use super::GdprQuery;
use crate::error::{Error, ErrorCode, Result};
use crate::policy::Role;
use crate::store::SpaceStats;

use super::DriverStats;

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Request {
    Hello(Role),
    Query { role: Role, query: GdprQuery },
    Admin(AdminCommand),
    Quit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdminCommand {
    Stats,
    Now,
    Reap,
    Advance(u64),
}

pub fn parse_request(line: &str) -> Result<Request> {
    let line = line.trim_end_matches(['\r', '\n']);
    let (verb, rest) = line.split_once(' ').unwrap_or((line, ""));
    match verb {
        "HELLO" => Ok(Request::Hello(rest.trim().parse()?)),
        "REQ" => {
            let mut parts = rest.splitn(3, ' ');
            let role: Role = parts.next().unwrap_or_default().parse()?;
            let op = parts.next().ok_or_else(|| Error::Malformed("REQ needs an operation".into()))?;
            let query = GdprQuery::parse(op, parts.next().unwrap_or(""))?;
            Ok(Request::Query { role, query })
        }
        "ADMIN" => {
            let words: Vec<&str> = rest.split_whitespace().collect();
            let cmd = match words.as_slice() {
                ["STATS"] => AdminCommand::Stats,
                ["NOW"] => AdminCommand::Now,
                ["REAP"] => AdminCommand::Reap,
                ["ADVANCE", ms] => {
                    AdminCommand::Advance(ms.parse().map_err(|_| Error::Malformed(format!("bad duration {ms:?}")))?)
                }
                _ => return Err(Error::Malformed(format!("unknown admin command {rest:?}"))),
            };
            Ok(Request::Admin(cmd))
        }
        "QUIT" => Ok(Request::Quit),
        other => Err(Error::Malformed(format!("unknown verb {other:?}"))),
    }
}

pub fn format_query(role: &Role, query: &GdprQuery) -> String {
    format!("REQ {role} {query}")
}

pub fn format_admin(cmd: AdminCommand) -> String {
    match cmd {
        AdminCommand::Stats => "ADMIN STATS".into(),
        AdminCommand::Now => "ADMIN NOW".into(),
        AdminCommand::Reap => "ADMIN REAP".into(),
        AdminCommand::Advance(ms) => format!("ADMIN ADVANCE {ms}"),
    }
}

pub fn write_response(w: &mut impl Write, result: &Result<Vec<String>>) -> std::io::Result<()> {
    match result {
        Ok(lines) => {
            writeln!(w, "OK {}", lines.len())?;
            for l in lines {
                writeln!(w, "{l}")?;
            }
        }
        Err(e) => writeln!(w, "ERR {} {}", e.code(), e.wire_message().replace(['\n', '\r'], " "))?,
    }
    w.flush()
}

/// Reads one response. An `ERR` line becomes the matching [`Error`].
pub fn read_response(r: &mut impl BufRead) -> Result<Vec<String>> {
    let head = read_line(r)?;
    if let Some(rest) = head.strip_prefix("ERR ") {
        let (code, msg) = rest.split_once(' ').unwrap_or((rest, ""));
        let code = ErrorCode::parse(code).ok_or_else(|| Error::Storage(format!("unknown error code {code:?}")))?;
        return Err(Error::from_code(code, msg));
    }
    let n: usize = head
        .strip_prefix("OK ")
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| Error::Storage(format!("unexpected response line {head:?}")))?;
    (0..n).map(|_| read_line(r)).collect()
}

fn read_line(r: &mut impl BufRead) -> Result<String> {
    let mut line = String::new();
    if r.read_line(&mut line)? == 0 {
        return Err(Error::Storage("connection closed".into()));
    }
    Ok(line.trim_end_matches(['\r', '\n']).to_string())
}

pub fn stats_line(s: &DriverStats) -> String {
    format!(
        "RECORDS={};PERSONAL={};TOTAL={};AUDIT={};LOGICAL={};",
        s.space.records, s.space.personal_data_bytes, s.space.total_db_bytes, s.audit_entries, s.logical_clock
    )
}

pub fn parse_stats_line(line: &str) -> Option<DriverStats> {
    let mut fields = std::collections::HashMap::new();
    for f in line.trim_end_matches(';').split(';') {
        let (k, v) = f.split_once('=')?;
        fields.insert(k, v);
    }
    let num = |k: &str| fields.get(k)?.parse::<u64>().ok();
    Some(DriverStats {
        space: SpaceStats::new(num("RECORDS")?, num("PERSONAL")?, num("TOTAL")?),
        audit_entries: num("AUDIT")?,
        logical_clock: fields.get("LOGICAL")?.parse().ok()?,
    })
}
