use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Weak};
use std::thread;
use std::time::Duration;

use parking_lot::Mutex;

use super::{FeatureReport, GdprQuery, QueryResponse, RegulatorResponse};
use crate::clock::Clock;
use crate::error::{Error, Result};
use crate::policy::audit::PendingEntry;
use crate::policy::{authorize, AuditLog, Constraint, Decision, DenyReason, Outcome, Role, NO_ACTOR};
use crate::store::{Erased, SpaceStats, Store, StoreConfig};

/// Operation name of reaper entries in the audit trail.
pub const REAP_OP: &str = "TTL-REAP";

/// Binds access control, storage and auditing behind one `execute` call.
#[derive(Debug)]
pub struct Engine {
    store: Store,
    audit: AuditLog,
    clock: Arc<dyn Clock>,
    config: StoreConfig,
    reaper_stop: Mutex<Option<Arc<AtomicBool>>>,
}

impl Engine {
    pub fn open(config: StoreConfig) -> Result<Engine> {
        let clock = config.clock_mode.build();
        Engine::with_clock(config, clock)
    }

    pub fn with_clock(config: StoreConfig, clock: Arc<dyn Clock>) -> Result<Engine> {
        let store = Store::open(&config)?;
        let audit = match config.data_dir() {
            Some(dir) => AuditLog::open(&dir, config.audit)?,
            None => AuditLog::in_memory(config.audit),
        };
        Ok(Engine { store, audit, clock, config, reaper_stop: Mutex::new(None) })
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn audit(&self) -> &AuditLog {
        &self.audit
    }

    pub fn config(&self) -> &StoreConfig {
        &self.config
    }

    pub fn now_ms(&self) -> u64 {
        self.clock.now_ms()
    }

    pub fn is_logical(&self) -> bool {
        self.clock.is_logical()
    }

    /// Moves a logical clock forward; false on a wall clock.
    pub fn advance(&self, ms: u64) -> bool {
        self.clock.advance(ms)
    }

    pub fn features(&self) -> FeatureReport {
        FeatureReport::from_config(&self.config)
    }

    pub fn space_stats(&self) -> SpaceStats {
        self.store.space_stats()
    }

    /// Validates, authorizes, dispatches and audits one query. Exactly one
    /// audit entry is written per call, whatever the outcome, and it is
    /// written before the response is returned.
    pub fn execute(&self, role: &Role, query: &GdprQuery) -> Result<QueryResponse> {
        let now = self.clock.now_ms();
        let result = self.run(role, query, now);
        let (outcome, count, erasures) = match &result {
            Ok((resp, erased)) => (Outcome::Ok, resp.count(), erased.as_slice()),
            Err(e) => (Outcome::of::<()>(&Err(e.clone())), 0, &[][..]),
        };
        let op = query.op_name();
        let selector = query.selector_text();
        self.audit.append(
            PendingEntry {
                timestamp_ms: now,
                role: role.name(),
                actor: role.actor(),
                op: &op,
                selector: &selector,
                outcome,
                count,
                key: query.target_key(),
            },
            erasures,
        )?;
        result.map(|(resp, _)| resp)
    }

    fn run(&self, role: &Role, query: &GdprQuery, now: u64) -> Result<(QueryResponse, Vec<Erased>)> {
        query.validate()?;
        match authorize(role, query) {
            Decision::Deny(reason) => return Err(Error::Denied(reason)),
            Decision::AllowFiltered(Constraint::Owner(user)) => {
                let key = query.target_key().expect("owner constraints apply to by-key queries");
                if self.store.owner_of(key).is_some_and(|owner| owner != user) {
                    return Err(Error::Denied(DenyReason::NotOwner));
                }
            }
            Decision::Allow => {}
        }
        if let Role::Regulator(_) = role {
            return self.dispatch_regulator(query, now).map(|r| (r.into(), Vec::new()));
        }
        self.dispatch(query, now)
    }

    fn dispatch(&self, query: &GdprQuery, now: u64) -> Result<(QueryResponse, Vec<Erased>)> {
        let ack = |count: usize| QueryResponse::Ack { count: count as u64 };
        Ok(match query {
            GdprQuery::CreateRecord(r) => {
                self.store.put_record(r.clone(), now)?;
                (ack(1), Vec::new())
            }
            GdprQuery::DeleteRecord(sel) => {
                let erased = self.store.delete_records(sel, now)?;
                (ack(erased.len()), erased)
            }
            GdprQuery::ReadData(sel) => (QueryResponse::Records(self.store.read_records(sel, now)?), Vec::new()),
            GdprQuery::UpdateData { key, data } => {
                self.store.update_data(key, data, now)?;
                (ack(1), Vec::new())
            }
            GdprQuery::UpdateMetadata { selector, edit } => {
                (ack(self.store.update_metadata(selector, edit, now)?), Vec::new())
            }
            GdprQuery::ReadMetadata(_)
            | GdprQuery::GetSystemLogs { .. }
            | GdprQuery::GetSystemFeatures
            | GdprQuery::VerifyDeletion(_) => (self.dispatch_regulator(query, now)?.into(), Vec::new()),
        })
    }

    /// The only path regulator queries take. It cannot reach record data.
    fn dispatch_regulator(&self, query: &GdprQuery, now: u64) -> Result<RegulatorResponse> {
        match query {
            GdprQuery::ReadMetadata(sel) => Ok(RegulatorResponse::Metadata(self.store.read_metadata(sel, now)?)),
            GdprQuery::GetSystemLogs { start, end } => {
                Ok(RegulatorResponse::Logs(self.audit.get_system_logs(*start, *end)?))
            }
            GdprQuery::GetSystemFeatures => Ok(RegulatorResponse::Features(self.features())),
            GdprQuery::VerifyDeletion(key) => {
                Ok(RegulatorResponse::Deletion(self.audit.verify_deletion(key, self.store.contains(key))?))
            }
            _ => Err(Error::Denied(DenyReason::RoleForbidden)),
        }
    }

    /// One reaper pass. Writes a controller `TTL-REAP` entry when anything
    /// was erased, timestamped at the end of the pass.
    pub fn reap(&self) -> Result<usize> {
        let erased = self.store.run_reaper_once(self.clock.now_ms())?;
        if erased.is_empty() {
            return Ok(0);
        }
        self.audit.append(
            PendingEntry {
                timestamp_ms: self.clock.now_ms(),
                role: Role::Controller.name(),
                actor: NO_ACTOR,
                op: REAP_OP,
                selector: "TTL",
                outcome: Outcome::Ok,
                count: erased.len() as u64,
                key: None,
            },
            &erased,
        )?;
        Ok(erased.len())
    }

    /// Starts the background reaper, which runs every `reap_interval_ms`
    /// until [`Engine::stop_reaper`] or until the engine is dropped.
    pub fn start_reaper(self: &Arc<Self>) {
        let mut slot = self.reaper_stop.lock();
        if slot.is_some() {
            return;
        }
        let stop = Arc::new(AtomicBool::new(false));
        *slot = Some(stop.clone());
        let weak: Weak<Engine> = Arc::downgrade(self);
        let interval = Duration::from_millis(self.config.reap_interval_ms);
        thread::Builder::new()
            .name("reaper".into())
            .spawn(move || loop {
                thread::sleep(interval);
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                let Some(engine) = weak.upgrade() else { break };
                if let Err(e) = engine.reap() {
                    log::error!("reaper pass failed: {e}");
                }
            })
            .expect("spawn reaper thread");
    }

    pub fn stop_reaper(&self) {
        if let Some(stop) = self.reaper_stop.lock().take() {
            stop.store(true, Ordering::Relaxed);
        }
    }
}

impl Drop for Engine {
    fn drop(&mut self) {
        self.stop_reaper();
    }
}
