//! Shadow oracle: a naive model of the store used to decide whether each
//! response is correct.
//!
//! Records live in an unsorted list and every selector is a linear scan. A
//! key-to-slot map makes by-key lookups O(1); it holds no logic of its own.
//!
//! The oracle never knows exactly when the backend executed a query, only a
//! window `[before, after]` around it, and it keeps each record's creation
//! instant as an interval. Under a logical clock both collapse to points and
//! every check is exact. Otherwise a record whose expiry falls inside the
//! window may or may not be visible, and both answers are accepted.

use std::collections::{HashMap, HashSet};

use crate::api::engine::REAP_OP;
use crate::api::{FeatureReport, GdprQuery, QueryResponse};
use crate::error::{Error, ErrorCode, Result};
use crate::policy::{authorize, AuditEntry, Constraint, Decision, DeletionStatus, Outcome, Role, NO_ACTOR};
use crate::record::{Metadata, PersonalRecord};
use crate::store::Selector;

/// Bounds on the backend instant at which a query ran.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub before: u64,
    pub after: u64,
}

impl Window {
    pub fn at(t: u64) -> Window {
        Window { before: t, after: t }
    }

    fn is_point(&self) -> bool {
        self.before == self.after
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tri {
    Yes,
    No,
    Maybe,
}

#[derive(Debug, Clone)]
struct Row {
    rec: PersonalRecord,
    created_lo: u64,
    created_hi: u64,
}

impl Row {
    fn expiry_lo(&self) -> u64 {
        self.created_lo.saturating_add(self.rec.meta.ttl.saturating_mul(1000))
    }

    fn expiry_hi(&self) -> u64 {
        self.created_hi.saturating_add(self.rec.meta.ttl.saturating_mul(1000))
    }

    fn visible(&self, w: Window) -> Tri {
        if self.expiry_lo() > w.after {
            Tri::Yes
        } else if self.expiry_hi() <= w.before {
            Tri::No
        } else {
            Tri::Maybe
        }
    }

    fn expired(&self, w: Window) -> Tri {
        match self.visible(w) {
            Tri::Yes => Tri::No,
            Tri::No => Tri::Yes,
            Tri::Maybe => Tri::Maybe,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Erasure {
    seq: u64,
    at: u64,
    due: u64,
}

/// How much of the backend the oracle can see.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    /// Reaping happens only when [`Oracle::reap`] mirrors it. Without this
    /// an expired record may vanish at any time.
    pub explicit_reaping: bool,
    /// Mirror the audit trail exactly. `Some(enabled)` when the oracle has
    /// seen every audited call since the backend was empty.
    pub audit: Option<bool>,
    /// `(partition, partitions)`: keys of other partitions are only checked
    /// against the selector predicate.
    pub partition: Option<(usize, usize)>,
    pub features: Option<FeatureReport>,
}

impl OracleConfig {
    /// Single worker, logical clock, fresh backend.
    pub fn strict() -> Self {
        OracleConfig { explicit_reaping: true, audit: Some(true), partition: None, features: None }
    }
}

#[derive(Debug)]
pub struct Oracle {
    cfg: OracleConfig,
    rows: Vec<Row>,
    slot: HashMap<String, usize>,
    entries: Vec<AuditEntry>,
    next_seq: u64,
    last_ts: u64,
    known: HashSet<String>,
    erasures: HashMap<String, Erasure>,
}

fn code(r: &Result<QueryResponse>) -> Option<ErrorCode> {
    r.as_ref().err().map(Error::code)
}

fn same_content(a: &PersonalRecord, b: &PersonalRecord) -> bool {
    a.key == b.key && a.data == b.data && a.meta == b.meta
}

impl Oracle {
    pub fn new(cfg: OracleConfig) -> Oracle {
        Oracle {
            cfg,
            rows: Vec::new(),
            slot: HashMap::new(),
            entries: Vec::new(),
            next_seq: 1,
            last_ts: 0,
            known: HashSet::new(),
            erasures: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Mirrored audit entries (empty unless the trail is mirrored).
    pub fn audit(&self) -> &[AuditEntry] {
        &self.entries
    }

    /// Takes a record the backend already holds, created somewhere in `w`.
    pub fn assume_loaded(&mut self, rec: PersonalRecord, w: Window) {
        self.known.insert(rec.key.clone());
        self.insert(rec, w);
    }

    /// Settles whether the mirrored trail is live. With auditing off the
    /// backend keeps no entries and numbers deletions 0.
    pub fn adopt_audit(&mut self, enabled: bool) {
        if self.cfg.audit.is_some() {
            self.cfg.audit = Some(enabled);
            if !enabled {
                self.entries.clear();
                self.next_seq = 1;
            }
        }
    }

    fn owns(&self, key: &str) -> bool {
        match self.cfg.partition {
            None => true,
            Some((p, n)) => key.get(1..).and_then(|d| d.parse::<u64>().ok()).is_some_and(|i| i % n as u64 == p as u64),
        }
    }

    fn row(&self, key: &str) -> Option<&Row> {
        self.slot.get(key).map(|&i| &self.rows[i])
    }

    fn present(&self, row: &Row, w: Window) -> Tri {
        if self.cfg.explicit_reaping || row.expired(w) == Tri::No {
            Tri::Yes
        } else {
            Tri::Maybe
        }
    }

    fn insert(&mut self, rec: PersonalRecord, w: Window) {
        let row = Row { rec, created_lo: w.before, created_hi: w.after };
        match self.slot.get(&row.rec.key) {
            Some(&i) => self.rows[i] = row,
            None => {
                self.slot.insert(row.rec.key.clone(), self.rows.len());
                self.rows.push(row);
            }
        }
    }

    fn remove(&mut self, key: &str) -> Option<Row> {
        let i = self.slot.remove(key)?;
        let row = self.rows.swap_remove(i);
        if let Some(moved) = self.rows.get(i) {
            self.slot.insert(moved.rec.key.clone(), i);
        }
        Some(row)
    }

    /// Mirrors one reaper pass at `now`; returns the number erased.
    pub fn reap(&mut self, now: u64) -> usize {
        let w = Window::at(now);
        let due: Vec<(String, u64)> =
            self.rows.iter().filter(|r| r.expired(w) == Tri::Yes).map(|r| (r.rec.key.clone(), r.expiry_hi())).collect();
        for (k, _) in &due {
            self.remove(k);
        }
        if !due.is_empty() {
            self.record(now, "controller", NO_ACTOR, REAP_OP, "TTL", Outcome::Ok, due.len() as u64, None, &due);
        }
        due.len()
    }

    /// Checks `actual` against the model, then applies the query's effect.
    /// Returns whether the response was acceptable.
    pub fn observe(&mut self, role: &Role, query: &GdprQuery, w: Window, actual: &Result<QueryResponse>) -> bool {
        let mut erased = Vec::new();
        let ok = self.judge(role, query, w, actual, &mut erased);
        let count = actual.as_ref().map_or(0, QueryResponse::count);
        let op = query.op_name();
        let selector = query.selector_text();
        self.record(
            w.after,
            role.name(),
            role.actor(),
            &op,
            &selector,
            Outcome::of(actual),
            count,
            query.target_key(),
            &erased,
        );
        ok
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &mut self,
        ts: u64,
        role: &str,
        actor: &str,
        op: &str,
        selector: &str,
        outcome: Outcome,
        count: u64,
        key: Option<&str>,
        erased: &[(String, u64)],
    ) {
        let ts = ts.max(self.last_ts);
        let enabled = self.cfg.audit == Some(true);
        let seq = if enabled { self.next_seq } else { 0 };
        if let Some(k) = key {
            self.known.insert(k.to_string());
        }
        for (k, due) in erased {
            self.known.insert(k.clone());
            self.erasures.insert(k.clone(), Erasure { seq, at: ts, due: *due });
        }
        if enabled {
            self.entries.push(AuditEntry {
                seq,
                timestamp_ms: ts,
                role: role.to_string(),
                actor: actor.to_string(),
                op: op.to_string(),
                selector: selector.to_string(),
                outcome,
                count,
            });
            self.next_seq += 1;
        }
        self.last_ts = ts;
    }

    fn judge(
        &mut self,
        role: &Role,
        query: &GdprQuery,
        w: Window,
        actual: &Result<QueryResponse>,
        erased: &mut Vec<(String, u64)>,
    ) -> bool {
        if let Err(e) = query.validate() {
            return code(actual) == Some(e.code());
        }
        match authorize(role, query) {
            Decision::Deny(_) => return code(actual) == Some(ErrorCode::Denied),
            Decision::AllowFiltered(Constraint::Owner(user)) => {
                let key = query.target_key().unwrap_or_default();
                let gate = match self.row(key) {
                    Some(r) if r.rec.meta.usr != user => self.present(r, w),
                    _ => Tri::No,
                };
                match (gate, code(actual)) {
                    (Tri::Yes, c) => return c == Some(ErrorCode::Denied),
                    (Tri::Maybe, Some(ErrorCode::Denied)) => return true,
                    _ => {}
                }
            }
            Decision::Allow => {}
        }
        if matches!(role, Role::Regulator(_)) {
            if let Ok(QueryResponse::Records(_)) = actual {
                return false;
            }
        }
        match query {
            GdprQuery::CreateRecord(r) => self.judge_create(r, w, actual),
            GdprQuery::ReadData(Selector::Key(k)) | GdprQuery::ReadMetadata(Selector::Key(k)) => {
                self.judge_read_key(query, k, w, actual)
            }
            GdprQuery::ReadData(sel) => match actual {
                Ok(QueryResponse::Records(rs)) => {
                    self.judge_set(sel, w, rs.iter().map(|r| (r.key.as_str(), Some(r.data.as_str()), &r.meta)))
                }
                _ => false,
            },
            GdprQuery::ReadMetadata(sel) => match actual {
                Ok(QueryResponse::Metadata(ms)) => {
                    self.judge_set(sel, w, ms.iter().map(|(k, m)| (k.as_str(), None, m)))
                }
                _ => false,
            },
            GdprQuery::UpdateData { key, data } => {
                let ok = self.judge_update_key(key, w, actual);
                if ok && actual.is_ok() {
                    let i = self.slot[key.as_str()];
                    self.rows[i].rec.data = data.clone();
                }
                ok
            }
            GdprQuery::UpdateMetadata { selector: Selector::Key(key), edit } => {
                let ok = self.judge_update_key(key, w, actual);
                if ok && actual.is_ok() {
                    let i = self.slot[key.as_str()];
                    edit.apply(&mut self.rows[i].rec.meta);
                }
                ok
            }
            GdprQuery::UpdateMetadata { selector, edit } => {
                let (mut must, mut may) = (0u64, 0u64);
                for row in self.rows.iter_mut() {
                    if !selector.matches(&row.rec, w.before) {
                        continue;
                    }
                    match row.visible(w) {
                        Tri::Yes => must += 1,
                        Tri::Maybe => may += 1,
                        Tri::No => continue,
                    }
                    edit.apply(&mut row.rec.meta);
                }
                matches!(actual, Ok(QueryResponse::Ack { count }) if *count >= must && *count <= must + may)
            }
            GdprQuery::DeleteRecord(Selector::Key(key)) => self.judge_delete_key(key, w, actual, erased),
            GdprQuery::DeleteRecord(sel) => self.judge_delete_set(sel, w, actual, erased),
            GdprQuery::GetSystemLogs { start, end } => self.judge_logs(*start, *end, actual),
            GdprQuery::GetSystemFeatures => match actual {
                Ok(QueryResponse::Features(f)) => self.cfg.features.as_ref().is_none_or(|want| want == f),
                _ => false,
            },
            GdprQuery::VerifyDeletion(key) => self.judge_verify(key, w, actual),
        }
    }

    fn judge_create(&mut self, r: &PersonalRecord, w: Window, actual: &Result<QueryResponse>) -> bool {
        let exists = self.row(&r.key).map_or(Tri::No, |row| self.present(row, w));
        match actual {
            Ok(QueryResponse::Ack { count: 1 }) if exists != Tri::Yes => {
                self.insert(r.clone(), w);
                true
            }
            Err(Error::DuplicateKey(_)) => exists != Tri::No,
            _ => false,
        }
    }

    fn judge_read_key(&self, query: &GdprQuery, key: &str, w: Window, actual: &Result<QueryResponse>) -> bool {
        let Some(row) = self.row(key) else { return code(actual) == Some(ErrorCode::NotFound) };
        let vis = row.visible(w);
        match actual {
            Err(Error::NotFound(_)) => vis != Tri::Yes,
            Ok(resp) if vis != Tri::No => match (query, resp) {
                (GdprQuery::ReadData(_), QueryResponse::Records(rs)) => rs.len() == 1 && same_content(&rs[0], &row.rec),
                (GdprQuery::ReadMetadata(_), QueryResponse::Metadata(ms)) => {
                    ms.len() == 1 && ms[0].0 == key && ms[0].1 == row.rec.meta
                }
                _ => false,
            },
            _ => false,
        }
    }

    /// Result-set check for non-key selectors: keys strictly ascending,
    /// every owned record visible, matching and identical to the model, and
    /// every record the model says must be visible present.
    fn judge_set<'a>(
        &self,
        sel: &Selector,
        w: Window,
        items: impl Iterator<Item = (&'a str, Option<&'a str>, &'a Metadata)>,
    ) -> bool {
        let mut prev: Option<&str> = None;
        let mut must_seen = 0usize;
        for (key, data, meta) in items {
            if prev.is_some_and(|p| p >= key) {
                return false;
            }
            prev = Some(key);
            if !self.owns(key) {
                let probe = PersonalRecord::new(key, data.unwrap_or("-"), meta.clone());
                if !sel.matches(&probe, w.before) {
                    return false;
                }
                continue;
            }
            let Some(row) = self.row(key) else { return false };
            let vis = row.visible(w);
            if vis == Tri::No || !sel.matches(&row.rec, w.before) || *meta != row.rec.meta {
                return false;
            }
            if data.is_some_and(|d| d != row.rec.data) {
                return false;
            }
            if vis == Tri::Yes {
                must_seen += 1;
            }
        }
        let must = self.rows.iter().filter(|r| r.visible(w) == Tri::Yes && sel.matches(&r.rec, w.before)).count();
        must_seen == must
    }

    fn judge_update_key(&self, key: &str, w: Window, actual: &Result<QueryResponse>) -> bool {
        let Some(row) = self.row(key) else { return code(actual) == Some(ErrorCode::NotFound) };
        let vis = row.visible(w);
        let present = self.present(row, w);
        match actual {
            Ok(QueryResponse::Ack { count: 1 }) => vis != Tri::No,
            Err(Error::Expired(_)) => present != Tri::No && vis != Tri::Yes,
            Err(Error::NotFound(_)) => present != Tri::Yes,
            _ => false,
        }
    }

    fn judge_delete_key(
        &mut self,
        key: &str,
        w: Window,
        actual: &Result<QueryResponse>,
        erased: &mut Vec<(String, u64)>,
    ) -> bool {
        let Some(row) = self.row(key) else { return code(actual) == Some(ErrorCode::NotFound) };
        let present = self.present(row, w);
        let due = row.expiry_hi().min(w.after);
        let ok = match actual {
            Ok(QueryResponse::Ack { count: 1 }) => true,
            Err(Error::NotFound(_)) => present != Tri::Yes,
            _ => false,
        };
        if ok {
            self.remove(key);
            erased.push((key.to_string(), due));
        }
        ok
    }

    fn judge_delete_set(
        &mut self,
        sel: &Selector,
        w: Window,
        actual: &Result<QueryResponse>,
        erased: &mut Vec<(String, u64)>,
    ) -> bool {
        let Ok(QueryResponse::Ack { count }) = actual else { return false };
        let (mut must, mut may) = (0u64, 0u64);
        let mut doomed = Vec::new();
        for row in &self.rows {
            let hit = match sel {
                Selector::ExpiredOnly => row.expired(w),
                _ if sel.matches(&row.rec, w.before) => Tri::Yes,
                _ => Tri::No,
            };
            let present = self.present(row, w);
            match (hit, present) {
                (Tri::No, _) => continue,
                (Tri::Yes, Tri::Yes) => must += 1,
                _ => may += 1,
            }
            if hit == Tri::Yes {
                doomed.push((row.rec.key.clone(), row.expiry_hi().min(w.after)));
            }
        }
        for (k, _) in &doomed {
            self.remove(k);
        }
        erased.extend(doomed);
        // Other partitions' expired records are erased too, so a global
        // expiry sweep only has a lower bound.
        let global = matches!(sel, Selector::ExpiredOnly) && self.cfg.partition.is_some_and(|(_, n)| n > 1);
        *count >= must && (global || *count <= must + may)
    }

    fn judge_logs(&self, start: u64, end: u64, actual: &Result<QueryResponse>) -> bool {
        if start > end {
            return code(actual) == Some(ErrorCode::InvalidRange);
        }
        let Ok(QueryResponse::Logs(got)) = actual else { return false };
        if self.cfg.audit.is_some() {
            let lo = self.entries.partition_point(|e| e.timestamp_ms < start);
            let hi = self.entries.partition_point(|e| e.timestamp_ms <= end);
            return got[..] == self.entries[lo..hi.max(lo)];
        }
        got.windows(2).all(|p| p[0].seq < p[1].seq)
            && got.iter().all(|e| e.timestamp_ms >= start && e.timestamp_ms <= end)
    }

    fn judge_verify(&self, key: &str, w: Window, actual: &Result<QueryResponse>) -> bool {
        if !self.known.contains(key) {
            return code(actual) == Some(ErrorCode::UnknownKey);
        }
        let Ok(QueryResponse::Deletion(got)) = actual else { return false };
        let not_erased = DeletionStatus { erased: false, deletion_seq: None, latency_ms: None };
        if let Some(row) = self.row(key) {
            return match self.present(row, w) {
                Tri::Yes => *got == not_erased,
                _ => true,
            };
        }
        match self.erasures.get(key) {
            None => *got == not_erased,
            Some(e) if self.cfg.audit.is_some() && w.is_point() => {
                *got == DeletionStatus {
                    erased: true,
                    deletion_seq: Some(e.seq),
                    latency_ms: Some(e.at.saturating_sub(e.due)),
                }
            }
            Some(_) => got.erased,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::api::Engine;
    use crate::record::parse_record;
    use crate::store::{EditOp, MetadataEdit, StoreConfig};

    fn rec(key: &str, usr: &str, ttl: u64) -> PersonalRecord {
        parse_record(&format!("{key};d;PUR=ads;TTL={ttl};USR={usr};OBJ=;DEC=;SHR=;SRC=s;")).unwrap()
    }

    /// Runs a script against a logical-clock engine and the strict oracle.
    fn agree(script: &[(u64, Role, GdprQuery)]) -> Vec<bool> {
        let engine = Engine::open(StoreConfig::logical()).unwrap();
        let mut oracle = Oracle::new(OracleConfig::strict());
        let mut now = 0;
        script
            .iter()
            .map(|(t, role, q)| {
                engine.advance(t - now);
                now = *t;
                assert_eq!(engine.reap().unwrap(), oracle.reap(now));
                let got = engine.execute(role, q);
                oracle.observe(role, q, Window::at(now), &got)
            })
            .collect()
    }

    #[test]
    fn strict_oracle_tracks_engine() {
        let c = Role::Controller;
        let neo = Role::Customer("neo".into());
        let reg = Role::Regulator("dpa".into());
        let edit = MetadataEdit::new(crate::record::Attribute::Obj, EditOp::Add, ["ads".to_string()].into()).unwrap();
        let script = vec![
            (0, c.clone(), GdprQuery::CreateRecord(rec("a", "neo", 1))),
            (0, c.clone(), GdprQuery::CreateRecord(rec("b", "neo", 100))),
            (0, c.clone(), GdprQuery::CreateRecord(rec("a", "neo", 1))),
            (10, neo.clone(), GdprQuery::ReadData(Selector::Usr("neo".into()))),
            (20, Role::Customer("trin".into()), GdprQuery::ReadData(Selector::Key("b".into()))),
            (30, neo.clone(), GdprQuery::UpdateMetadata { selector: Selector::Key("b".into()), edit }),
            (40, Role::Processor("p".into()), GdprQuery::ReadData(Selector::Pur("ads".into()))),
            (1000, reg.clone(), GdprQuery::VerifyDeletion("a".into())),
            (1500, reg.clone(), GdprQuery::VerifyDeletion("zzz".into())),
            (1600, c.clone(), GdprQuery::DeleteRecord(Selector::Usr("neo".into()))),
            (1700, reg.clone(), GdprQuery::VerifyDeletion("b".into())),
            (1800, reg.clone(), GdprQuery::GetSystemLogs { start: 0, end: 1700 }),
            (1900, reg, GdprQuery::ReadData(Selector::Key("b".into()))),
        ];
        assert!(agree(&script).into_iter().all(|ok| ok));
    }

    #[test]
    fn wrong_answers_are_caught() {
        let mut oracle = Oracle::new(OracleConfig::strict());
        let c = Role::Controller;
        let create = GdprQuery::CreateRecord(rec("a", "neo", 100));
        assert!(oracle.observe(&c, &create, Window::at(0), &Ok(QueryResponse::Ack { count: 1 })));
        let read = GdprQuery::ReadData(Selector::Usr("neo".into()));
        let mut wrong = rec("a", "neo", 100);
        wrong.data = "x".into();
        assert!(!oracle.observe(&c, &read, Window::at(1), &Ok(QueryResponse::Records(vec![wrong.into()]))));
        assert!(!oracle.observe(&c, &read, Window::at(2), &Ok(QueryResponse::Records(vec![]))));
        assert!(oracle.observe(
            &c,
            &read,
            Window::at(3),
            &Ok(QueryResponse::Records(vec![rec("a", "neo", 100).into()]))
        ));
    }

    #[test]
    fn window_tolerates_expiry_in_flight() {
        let cfg = OracleConfig { explicit_reaping: false, audit: None, partition: None, features: None };
        let mut oracle = Oracle::new(cfg);
        let c = Role::Controller;
        let create = GdprQuery::CreateRecord(rec("a", "neo", 1));
        oracle.observe(&c, &create, Window { before: 0, after: 5 }, &Ok(QueryResponse::Ack { count: 1 }));
        let read = GdprQuery::ReadData(Selector::Key("a".into()));
        let w = Window { before: 998, after: 1003 };
        assert!(oracle.observe(&c, &read, w, &Err(Error::NotFound("a".into()))));
        assert!(oracle.observe(&c, &read, w, &Ok(QueryResponse::Records(vec![rec("a", "neo", 1).into()]))));
        assert!(!oracle.observe(&c, &read, Window::at(500), &Err(Error::NotFound("a".into()))));
    }
}
