use std::io::{BufRead, BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use super::wire::{self, AdminCommand, Request};
use super::{BackendDriver, EmbeddedDriver, Engine};
use crate::error::{Error, Result};
use crate::policy::Role;

/// TCP front end for an engine. One thread per connection.
#[derive(Debug)]
pub struct Server {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl Server {
    /// Binds `addr` (port 0 picks a free port) and starts accepting.
    pub fn bind(engine: Arc<Engine>, addr: &str) -> Result<Server> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let accept = thread::Builder::new()
            .name("accept".into())
            .spawn(move || {
                for conn in listener.incoming() {
                    if flag.load(Ordering::Relaxed) {
                        break;
                    }
                    match conn {
                        Ok(stream) => {
                            let driver = EmbeddedDriver::new(engine.clone());
                            thread::spawn(move || {
                                if let Err(e) = serve_connection(&driver, stream) {
                                    log::debug!("connection ended: {e}");
                                }
                            });
                        }
                        Err(e) => log::warn!("accept failed: {e}"),
                    }
                }
            })
            .map_err(Error::from)?;
        Ok(Server { addr, stop, accept: Some(accept) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Blocks until the accept loop ends.
    pub fn wait(mut self) {
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }

    /// Stops accepting new connections. Open sessions run until closed.
    pub fn shutdown(mut self) {
        self.stop_accepting();
    }

    fn stop_accepting(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        // Wake the blocking accept so it sees the flag.
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        if self.accept.is_some() {
            self.stop_accepting();
        }
    }
}

fn serve_connection(driver: &EmbeddedDriver, stream: TcpStream) -> std::io::Result<()> {
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    let mut session: Option<Role> = None;
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Ok(());
        }
        if line.trim().is_empty() {
            continue;
        }
        let result = match wire::parse_request(&line) {
            Ok(Request::Quit) => return Ok(()),
            Ok(Request::Hello(role)) => {
                session = Some(role);
                Ok(Vec::new())
            }
            Ok(Request::Query { role, query }) => match &session {
                None => Err(Error::Malformed("send HELLO before REQ".into())),
                Some(bound) if *bound != role => Err(Error::Malformed(format!("role {role} does not match session"))),
                Some(_) => driver.execute(&role, &query).map(|r| r.to_lines()),
            },
            Ok(Request::Admin(cmd)) => admin(driver, cmd),
            Err(e) => Err(e),
        };
        wire::write_response(&mut writer, &result)?;
    }
}

fn admin(driver: &EmbeddedDriver, cmd: AdminCommand) -> Result<Vec<String>> {
    Ok(vec![match cmd {
        AdminCommand::Stats => wire::stats_line(&driver.stats()?),
        AdminCommand::Now => format!("NOW={}", driver.now_ms()?),
        AdminCommand::Reap => format!("COUNT {}", driver.reap()?),
        AdminCommand::Advance(ms) => format!("ADVANCED={}", driver.advance(ms)?),
    }])
}
