use std::collections::HashMap;
use std::io::{BufReader, BufWriter, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::Arc;

use parking_lot::Mutex;

use super::wire::{self, AdminCommand};
use super::{BackendDriver, DriverStats, GdprQuery, QueryResponse};
use crate::error::{Error, Result};
use crate::policy::Role;

#[derive(Debug)]
struct Connection {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl Connection {
    fn open(addr: &str) -> Result<Connection> {
        let addrs: Vec<_> =
            addr.to_socket_addrs().map_err(|e| Error::Storage(format!("cannot resolve {addr}: {e}")))?.collect();
        let stream = TcpStream::connect(&addrs[..]).map_err(|e| Error::Storage(format!("cannot reach {addr}: {e}")))?;
        stream.set_nodelay(true)?;
        Ok(Connection { reader: BufReader::new(stream.try_clone()?), writer: BufWriter::new(stream) })
    }

    fn call(&mut self, line: &str) -> Result<Vec<String>> {
        writeln!(self.writer, "{line}")?;
        self.writer.flush()?;
        wire::read_response(&mut self.reader)
    }
}

/// Wire-protocol client. Keeps one session per role, since a session is
/// bound to the role named in its `HELLO`.
#[derive(Debug)]
pub struct RemoteDriver {
    addr: String,
    sessions: Mutex<HashMap<Role, Arc<Mutex<Connection>>>>,
    admin: Mutex<Connection>,
}

impl RemoteDriver {
    pub fn connect(addr: &str) -> Result<RemoteDriver> {
        let admin = Connection::open(addr)?;
        Ok(RemoteDriver { addr: addr.to_string(), sessions: Mutex::new(HashMap::new()), admin: Mutex::new(admin) })
    }

    fn session(&self, role: &Role) -> Result<Arc<Mutex<Connection>>> {
        if let Some(c) = self.sessions.lock().get(role) {
            return Ok(c.clone());
        }
        let mut conn = Connection::open(&self.addr)?;
        conn.call(&format!("HELLO {role}"))?;
        let conn = Arc::new(Mutex::new(conn));
        Ok(self.sessions.lock().entry(role.clone()).or_insert(conn).clone())
    }

    fn admin_call(&self, cmd: AdminCommand) -> Result<String> {
        let lines = self.admin.lock().call(&wire::format_admin(cmd))?;
        lines.into_iter().next().ok_or_else(|| Error::Storage("empty admin response".into()))
    }
}

impl BackendDriver for RemoteDriver {
    fn execute(&self, role: &Role, query: &GdprQuery) -> Result<QueryResponse> {
        let conn = self.session(role)?;
        let lines = conn.lock().call(&wire::format_query(role, query))?;
        QueryResponse::from_lines(query, &lines)
    }

    fn now_ms(&self) -> Result<u64> {
        let line = self.admin_call(AdminCommand::Now)?;
        line.strip_prefix("NOW=")
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| Error::Storage(format!("bad NOW reply {line:?}")))
    }

    fn advance(&self, ms: u64) -> Result<bool> {
        let line = self.admin_call(AdminCommand::Advance(ms))?;
        Ok(line == "ADVANCED=true")
    }

    fn reap(&self) -> Result<usize> {
        let line = self.admin_call(AdminCommand::Reap)?;
        line.strip_prefix("COUNT ")
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| Error::Storage(format!("bad REAP reply {line:?}")))
    }

    fn stats(&self) -> Result<DriverStats> {
        let line = self.admin_call(AdminCommand::Stats)?;
        wire::parse_stats_line(&line).ok_or_else(|| Error::Storage(format!("bad STATS reply {line:?}")))
    }

    fn name(&self) -> &str {
        "remote"
    }
}
