//! Embedded reference store.
//!
//! Records live in a primary hash index. Optional secondary indices cover
//! USR, PUR, OBJ, DEC, SHR and expiry. Expired records are invisible to every
//! read and update from the instant they expire; the reaper then erases them
//! with a deterministic full sweep of everything whose expiry is `<= now`.
//!
//! All operations take the query instant explicitly, so the store itself is
//! clock-free. The engine in [`crate::api`] supplies time.

pub mod index;
pub mod persist;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use parking_lot::RwLock;

use crate::clock::ClockMode;
use crate::error::{Error, Result};
use crate::record::{is_valid_token, parse_value_list, Attribute, Metadata, PersonalRecord, ValueSet};

use index::{tokens_of, TokenIndex};
pub use index::{IndexSet, IndexedAttr};
use persist::{AppendLog, LogEntry, Transform};

/// Objection token that withdraws a record from automated decision-making.
pub const AUTOMATED: &str = "automated";

/// Record selection predicate shared by reads, updates and deletes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Selector {
    Key(String),
    Usr(String),
    /// `p` listed in PUR and not objected to in OBJ.
    Pur(String),
    /// `p` not objected to in OBJ.
    ObjAbsent(String),
    /// OBJ does not contain [`AUTOMATED`].
    DecAllowed,
    Shr(String),
    /// Records whose expiry is `<= now`.
    ExpiredOnly,
}

impl Selector {
    pub fn matches(&self, r: &PersonalRecord, now_ms: u64) -> bool {
        let m = &r.meta;
        match self {
            Selector::Key(k) => r.key == *k,
            Selector::Usr(u) => m.usr == *u,
            Selector::Pur(p) => m.pur.contains(p) && !m.obj.contains(p),
            Selector::ObjAbsent(p) => !m.obj.contains(p),
            Selector::DecAllowed => !m.obj.contains(AUTOMATED),
            Selector::Shr(s) => m.shr.contains(s),
            Selector::ExpiredOnly => r.is_expired(now_ms),
        }
    }

    pub fn token(&self) -> Option<&str> {
        match self {
            Selector::Key(t) | Selector::Usr(t) | Selector::Pur(t) | Selector::ObjAbsent(t) | Selector::Shr(t) => {
                Some(t)
            }
            Selector::DecAllowed | Selector::ExpiredOnly => None,
        }
    }

    fn check_token(&self) -> Result<()> {
        match self.token() {
            Some(t) if !is_valid_token(t) => Err(Error::Malformed(format!("invalid selector token {t:?}"))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selector::Key(k) => write!(f, "KEY={k}"),
            Selector::Usr(u) => write!(f, "USR={u}"),
            Selector::Pur(p) => write!(f, "PUR={p}"),
            Selector::ObjAbsent(p) => write!(f, "OBJ={p}"),
            Selector::DecAllowed => f.write_str("DEC"),
            Selector::Shr(s) => write!(f, "SHR={s}"),
            Selector::ExpiredOnly => f.write_str("TTL"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EditOp {
    Add,
    Remove,
    Set,
}

impl EditOp {
    pub fn as_str(self) -> &'static str {
        match self {
            EditOp::Add => "add",
            EditOp::Remove => "remove",
            EditOp::Set => "set",
        }
    }
}

impl FromStr for EditOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "add" => Ok(EditOp::Add),
            "remove" => Ok(EditOp::Remove),
            "set" => Ok(EditOp::Set),
            other => Err(Error::Malformed(format!("unknown edit op {other:?}"))),
        }
    }
}

/// A validated change to one mutable metadata attribute.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MetadataEdit {
    attribute: Attribute,
    op: EditOp,
    values: ValueSet,
}

impl MetadataEdit {
    /// USR and SRC are fixed at creation. TTL only accepts `set` with one
    /// integer value.
    pub fn new(attribute: Attribute, op: EditOp, values: ValueSet) -> Result<Self> {
        match attribute {
            Attribute::Usr | Attribute::Src => {
                return Err(Error::InvalidAttribute(format!("{attribute} is immutable after creation")))
            }
            Attribute::Ttl => {
                if op != EditOp::Set {
                    return Err(Error::InvalidAttribute("TTL only supports set".into()));
                }
                let ok = values.len() == 1 && values.iter().all(|v| v.parse::<u64>().is_ok());
                if !ok {
                    return Err(Error::Malformed("TTL edit needs exactly one integer".into()));
                }
            }
            _ => {
                if let Some(bad) = values.iter().find(|v| !is_valid_token(v)) {
                    return Err(Error::Malformed(format!("invalid token {bad:?}")));
                }
            }
        }
        Ok(MetadataEdit { attribute, op, values })
    }

    /// Parses `NAME=v1,v2` under the given op.
    pub fn parse(op: EditOp, assignment: &str) -> Result<Self> {
        let (name, values) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Malformed(format!("expected NAME=values, got {assignment:?}")))?;
        let attribute =
            Attribute::parse(name).ok_or_else(|| Error::InvalidAttribute(format!("unknown attribute {name:?}")))?;
        let values = parse_value_list(values, attribute.name()).map_err(|e| Error::Malformed(e.to_string()))?;
        MetadataEdit::new(attribute, op, values)
    }

    pub fn attribute(&self) -> Attribute {
        self.attribute
    }

    pub fn op(&self) -> EditOp {
        self.op
    }

    pub fn values(&self) -> &ValueSet {
        &self.values
    }

    pub fn apply(&self, meta: &mut Metadata) {
        if self.attribute == Attribute::Ttl {
            meta.ttl = self.values.iter().next().and_then(|v| v.parse().ok()).unwrap_or(meta.ttl);
            return;
        }
        let set = meta.set_mut(self.attribute).expect("mutable set attribute");
        match self.op {
            EditOp::Add => set.extend(self.values.iter().cloned()),
            EditOp::Remove => set.retain(|v| !self.values.contains(v)),
            EditOp::Set => set.clone_from(&self.values),
        }
    }
}

impl fmt::Display for MetadataEdit {
    /// `<op> NAME=v1,v2`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let values: Vec<&str> = self.values.iter().map(String::as_str).collect();
        write!(f, "{} {}={}", self.op.as_str(), self.attribute, values.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Persistence {
    None,
    /// Append-only log in `dir`, or in `$GDPRKV_DATA_DIR` when `dir` is unset.
    AppendLog {
        dir: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AtRestTransform {
    Identity,
    /// Seals log frames with a key derived from `secret`, or from
    /// `$GDPRKV_AT_REST_KEY` when unset.
    Encrypted {
        secret: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreConfig {
    pub index_attributes: IndexSet,
    pub reap_interval_ms: u64,
    pub clock_mode: ClockMode,
    pub persistence: Persistence,
    pub at_rest_transform: AtRestTransform,
    /// Record every query in the audit trail.
    pub audit: bool,
}

impl Default for StoreConfig {
    fn default() -> Self {
        StoreConfig {
            index_attributes: IndexSet::all(),
            reap_interval_ms: 500,
            clock_mode: ClockMode::Wall,
            persistence: Persistence::None,
            at_rest_transform: AtRestTransform::Identity,
            audit: true,
        }
    }
}

impl StoreConfig {
    /// In-memory, fully indexed, logical clock: the deterministic test setup.
    pub fn logical() -> Self {
        StoreConfig { clock_mode: ClockMode::Logical, ..Default::default() }
    }

    pub fn with_indices(mut self, index: IndexSet) -> Self {
        self.index_attributes = index;
        self
    }

    /// The reaper meets the sub-second erasure bound only at intervals of
    /// at most one second.
    pub fn strict_ttl(&self) -> bool {
        self.reap_interval_ms > 0 && self.reap_interval_ms <= 1000
    }

    pub fn data_dir(&self) -> Option<PathBuf> {
        match &self.persistence {
            Persistence::None => None,
            Persistence::AppendLog { dir: Some(d) } => Some(d.clone()),
            Persistence::AppendLog { dir: None } => std::env::var_os(persist::DATA_DIR_ENV).map(PathBuf::from),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reap_interval_ms == 0 {
            return Err(Error::Storage("reap_interval_ms must be positive".into()));
        }
        if matches!(self.persistence, Persistence::AppendLog { .. }) && self.data_dir().is_none() {
            return Err(Error::Storage(format!("no data directory: set {}", persist::DATA_DIR_ENV)));
        }
        Ok(())
    }

    fn transform(&self) -> Result<Transform> {
        match &self.at_rest_transform {
            AtRestTransform::Identity => Ok(Transform::Identity),
            AtRestTransform::Encrypted { secret } => {
                let secret = match secret {
                    Some(s) => s.clone(),
                    None => std::env::var(persist::AT_REST_KEY_ENV).map_err(|_| {
                        Error::Storage(format!("encryption requested but {} is unset", persist::AT_REST_KEY_ENV))
                    })?,
                };
                Ok(Transform::sealed(&secret))
            }
        }
    }
}

/// Footprint of the stored data. The audit trail is not included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceStats {
    pub records: u64,
    /// Sum of data-field lengths.
    pub personal_data_bytes: u64,
    /// Keys, data, metadata values and secondary index entries.
    pub total_db_bytes: u64,
    pub space_factor: f64,
}

impl SpaceStats {
    pub fn new(records: u64, personal_data_bytes: u64, total_db_bytes: u64) -> Self {
        let space_factor =
            if personal_data_bytes == 0 { 1.0 } else { total_db_bytes as f64 / personal_data_bytes as f64 };
        SpaceStats { records, personal_data_bytes, total_db_bytes, space_factor }
    }
}

/// A record removed by a delete or the reaper. `due_ms` is when erasure
/// became owed: the expiry instant, or the request time if that came first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Erased {
    pub key: String,
    pub due_ms: u64,
}

#[derive(Debug, Default)]
struct Inner {
    records: BTreeMap<Arc<str>, Arc<PersonalRecord>>,
    tokens: [Option<TokenIndex>; 5],
    expiry: Option<BTreeSet<(u64, Arc<str>)>>,
    log: Option<AppendLog>,
}

const COMPACT_MIN_FRAMES: usize = 4096;

impl Inner {
    fn new(indexed: IndexSet) -> Self {
        let mut inner = Inner::default();
        for (slot, attr) in IndexedAttr::TOKEN.into_iter().enumerate() {
            if indexed.contains(attr) {
                inner.tokens[slot] = Some(TokenIndex::default());
            }
        }
        if indexed.contains(IndexedAttr::Expiry) {
            inner.expiry = Some(BTreeSet::new());
        }
        inner
    }

    fn token_index(&self, attr: IndexedAttr) -> Option<&TokenIndex> {
        let slot = IndexedAttr::TOKEN.iter().position(|a| *a == attr)?;
        self.tokens[slot].as_ref()
    }

    fn insert(&mut self, record: PersonalRecord) {
        let key: Arc<str> = Arc::from(record.key.as_str());
        for (slot, attr) in IndexedAttr::TOKEN.into_iter().enumerate() {
            if let Some(idx) = self.tokens[slot].as_mut() {
                idx.insert(&key, &tokens_of(attr, &record.meta));
            }
        }
        if let Some(exp) = self.expiry.as_mut() {
            exp.insert((record.expiry_ms(), key.clone()));
        }
        self.records.insert(key, Arc::new(record));
    }

    fn remove(&mut self, key: &str) -> Option<Arc<PersonalRecord>> {
        let (arc_key, record) = self.records.remove_entry(key)?;
        for (slot, attr) in IndexedAttr::TOKEN.into_iter().enumerate() {
            if let Some(idx) = self.tokens[slot].as_mut() {
                idx.remove(key, &tokens_of(attr, &record.meta));
            }
        }
        if let Some(exp) = self.expiry.as_mut() {
            exp.remove(&(record.expiry_ms(), arc_key));
        }
        Some(record)
    }

    /// Keys that may match `sel`, narrowed by an index when one applies.
    /// `None` means every record is a candidate. Callers still filter with
    /// [`Selector::matches`].
    fn candidates(&self, sel: &Selector, now_ms: u64) -> Option<Vec<Arc<str>>> {
        let via = |attr: IndexedAttr, token: &str| -> Option<Vec<Arc<str>>> {
            self.token_index(attr).map(|idx| idx.get(token).cloned().collect())
        };
        match sel {
            Selector::Key(k) => {
                Some(self.records.get_key_value(k.as_str()).map(|(k, _)| k.clone()).into_iter().collect())
            }
            Selector::Usr(u) => via(IndexedAttr::Usr, u),
            Selector::Pur(p) => via(IndexedAttr::Pur, p),
            Selector::Shr(s) => via(IndexedAttr::Shr, s),
            Selector::ExpiredOnly => self
                .expiry
                .as_ref()
                .map(|exp| exp.iter().take_while(|(e, _)| *e <= now_ms).map(|(_, k)| k.clone()).collect()),
            Selector::ObjAbsent(_) | Selector::DecAllowed => None,
        }
    }

    /// Matching records, optionally restricted to unexpired ones, sorted by key.
    fn select(&self, sel: &Selector, now_ms: u64, visible_only: bool) -> Vec<&Arc<PersonalRecord>> {
        let keep = |r: &&Arc<PersonalRecord>| sel.matches(r, now_ms) && (!visible_only || !r.is_expired(now_ms));
        match self.candidates(sel, now_ms) {
            // The map is key-ordered already.
            None => self.records.values().filter(keep).collect(),
            Some(keys) => {
                let mut out: Vec<_> = keys.iter().filter_map(|k| self.records.get(k)).filter(keep).collect();
                out.sort_unstable_by(|a, b| a.key.cmp(&b.key));
                out
            }
        }
    }

    fn persist_put(&mut self, record: &PersonalRecord) -> Result<()> {
        match self.log.as_mut() {
            Some(log) => log.append_put(record),
            None => Ok(()),
        }
    }

    fn persist_del(&mut self, key: &str, ts: u64) -> Result<()> {
        match self.log.as_mut() {
            Some(log) => log.append_del(key, ts),
            None => Ok(()),
        }
    }

    fn maybe_compact(&mut self) -> Result<()> {
        let live = self.records.len();
        if let Some(log) = self.log.as_mut() {
            if log.frames() > COMPACT_MIN_FRAMES && log.frames() > 2 * live {
                log.compact(self.records.values().map(|r| &**r))?;
            }
        }
        Ok(())
    }
}

/// Thread-safe reference store.
#[derive(Debug)]
pub struct Store {
    inner: RwLock<Inner>,
    indexed: IndexSet,
}

impl Store {
    pub fn in_memory(indexed: IndexSet) -> Self {
        Store { inner: RwLock::new(Inner::new(indexed)), indexed }
    }

    /// Opens a store per `config`, replaying the append log when persistence
    /// is enabled.
    pub fn open(config: &StoreConfig) -> Result<Self> {
        config.validate()?;
        let store = Store::in_memory(config.index_attributes);
        if let Some(dir) = config.data_dir() {
            let (log, entries) = AppendLog::open(&dir, config.transform()?)?;
            let mut inner = store.inner.write();
            for entry in entries {
                match entry {
                    LogEntry::Put(record) => {
                        inner.remove(&record.key);
                        inner.insert(record);
                    }
                    LogEntry::Del { key, .. } => {
                        inner.remove(&key);
                    }
                }
            }
            inner.log = Some(log);
            inner.maybe_compact()?;
        }
        Ok(store)
    }

    pub fn indexed(&self) -> IndexSet {
        self.indexed
    }

    /// Records present, including expired ones not yet reaped.
    pub fn len(&self) -> usize {
        self.inner.read().records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, key: &str) -> bool {
        self.inner.read().records.contains_key(key)
    }

    /// Owner of a present record, expired or not.
    pub fn owner_of(&self, key: &str) -> Option<String> {
        self.inner.read().records.get(key).map(|r| r.meta.usr.clone())
    }

    /// Inserts a new record created at `now_ms`.
    pub fn put_record(&self, mut record: PersonalRecord, now_ms: u64) -> Result<()> {
        record.validate().map_err(|e| Error::Malformed(e.to_string()))?;
        record.created_at = now_ms;
        let mut inner = self.inner.write();
        if inner.records.contains_key(record.key.as_str()) {
            return Err(Error::DuplicateKey(record.key));
        }
        inner.persist_put(&record)?;
        inner.insert(record);
        inner.maybe_compact()
    }

    /// Visible records matching a data-read selector, sorted by key.
    pub fn read_records(&self, sel: &Selector, now_ms: u64) -> Result<Vec<Arc<PersonalRecord>>> {
        match sel {
            Selector::Key(_) | Selector::Usr(_) | Selector::Pur(_) | Selector::ObjAbsent(_) | Selector::DecAllowed => {}
            other => return Err(Error::InvalidSelector(format!("{other} is not a data-read selector"))),
        }
        sel.check_token()?;
        let inner = self.inner.read();
        let found: Vec<Arc<PersonalRecord>> = inner.select(sel, now_ms, true).into_iter().cloned().collect();
        if let (Selector::Key(k), true) = (sel, found.is_empty()) {
            return Err(Error::NotFound(k.clone()));
        }
        Ok(found)
    }

    /// Visible `(key, metadata)` pairs for a metadata-read selector.
    pub fn read_metadata(&self, sel: &Selector, now_ms: u64) -> Result<Vec<(String, Metadata)>> {
        match sel {
            Selector::Key(_) | Selector::Usr(_) | Selector::Shr(_) => {}
            other => return Err(Error::InvalidSelector(format!("{other} is not a metadata-read selector"))),
        }
        sel.check_token()?;
        let inner = self.inner.read();
        let found: Vec<(String, Metadata)> =
            inner.select(sel, now_ms, true).into_iter().map(|r| (r.key.clone(), r.meta.clone())).collect();
        if let (Selector::Key(k), true) = (sel, found.is_empty()) {
            return Err(Error::NotFound(k.clone()));
        }
        Ok(found)
    }

    /// Replaces the data payload; metadata and creation time are kept.
    pub fn update_data(&self, key: &str, data: &str, now_ms: u64) -> Result<()> {
        if !is_valid_token(data) {
            return Err(Error::Malformed(format!("invalid data token {data:?}")));
        }
        let mut inner = self.inner.write();
        let current = inner.records.get(key).ok_or_else(|| Error::NotFound(key.to_string()))?;
        if current.is_expired(now_ms) {
            return Err(Error::Expired(key.to_string()));
        }
        let mut updated = PersonalRecord::clone(current);
        updated.data = data.to_string();
        inner.persist_put(&updated)?;
        // Data is not indexed, so the record can be swapped in place.
        *inner.records.get_mut(key).expect("present") = Arc::new(updated);
        inner.maybe_compact()
    }

    /// Applies `edit` to every visible record matched by `sel`. Each record
    /// is re-indexed under the same write lock, so readers see either the
    /// old or the new metadata.
    pub fn update_metadata(&self, sel: &Selector, edit: &MetadataEdit, now_ms: u64) -> Result<usize> {
        match sel {
            Selector::Key(_) | Selector::Pur(_) | Selector::Usr(_) | Selector::Shr(_) => {}
            other => return Err(Error::InvalidSelector(format!("{other} is not an update selector"))),
        }
        sel.check_token()?;
        let mut inner = self.inner.write();
        if let Selector::Key(k) = sel {
            match inner.records.get(k.as_str()) {
                None => return Err(Error::NotFound(k.clone())),
                Some(r) if r.is_expired(now_ms) => return Err(Error::Expired(k.clone())),
                Some(_) => {}
            }
        }
        let targets: Vec<Arc<PersonalRecord>> = inner.select(sel, now_ms, true).into_iter().cloned().collect();
        for target in &targets {
            let mut record = PersonalRecord::clone(target);
            edit.apply(&mut record.meta);
            inner.persist_put(&record)?;
            inner.remove(&record.key);
            inner.insert(record);
        }
        inner.maybe_compact()?;
        Ok(targets.len())
    }

    /// Removes every present record matched by `sel`, expired or not.
    pub fn delete_records(&self, sel: &Selector, now_ms: u64) -> Result<Vec<Erased>> {
        match sel {
            Selector::Key(_) | Selector::Pur(_) | Selector::Usr(_) | Selector::ExpiredOnly => {}
            other => return Err(Error::InvalidSelector(format!("{other} is not a delete selector"))),
        }
        sel.check_token()?;
        let mut inner = self.inner.write();
        let keys: Vec<String> = inner.select(sel, now_ms, false).into_iter().map(|r| r.key.clone()).collect();
        if let (Selector::Key(k), true) = (sel, keys.is_empty()) {
            return Err(Error::NotFound(k.clone()));
        }
        let mut erased = Vec::with_capacity(keys.len());
        for key in keys {
            inner.persist_del(&key, now_ms)?;
            if let Some(r) = inner.remove(&key) {
                erased.push(Erased { due_ms: r.expiry_ms().min(now_ms), key });
            }
        }
        inner.maybe_compact()?;
        Ok(erased)
    }

    /// Erases every record whose expiry is `<= now_ms`. The write lock is
    /// taken once per record so readers are never held up by a whole sweep.
    pub fn run_reaper_once(&self, now_ms: u64) -> Result<Vec<Erased>> {
        let mut erased = Vec::new();
        if self.indexed.contains(IndexedAttr::Expiry) {
            loop {
                let mut inner = self.inner.write();
                let next = match inner.expiry.as_ref().and_then(|e| e.first()) {
                    Some((exp, key)) if *exp <= now_ms => (*exp, key.to_string()),
                    _ => break,
                };
                inner.persist_del(&next.1, now_ms)?;
                inner.remove(&next.1);
                erased.push(Erased { key: next.1, due_ms: next.0 });
            }
        } else {
            let expired: Vec<String> = {
                let inner = self.inner.read();
                inner.records.values().filter(|r| r.is_expired(now_ms)).map(|r| r.key.clone()).collect()
            };
            for key in expired {
                let mut inner = self.inner.write();
                let still_expired = inner.records.get(key.as_str()).is_some_and(|r| r.is_expired(now_ms));
                if still_expired {
                    inner.persist_del(&key, now_ms)?;
                    let r = inner.remove(&key).expect("present");
                    erased.push(Erased { key, due_ms: r.expiry_ms() });
                }
            }
        }
        if !erased.is_empty() {
            self.inner.write().maybe_compact()?;
        }
        Ok(erased)
    }

    pub fn space_stats(&self) -> SpaceStats {
        let inner = self.inner.read();
        let mut personal = 0u64;
        let mut total = 0u64;
        for r in inner.records.values() {
            personal += r.data.len() as u64;
            total += (r.key.len() + r.data.len() + r.meta.value_bytes()) as u64;
        }
        total += inner.tokens.iter().flatten().map(TokenIndex::bytes).sum::<u64>();
        if let Some(exp) = inner.expiry.as_ref() {
            total += exp.iter().map(|(_, k)| 8 + k.len() as u64).sum::<u64>();
        }
        SpaceStats::new(inner.records.len() as u64, personal, total)
    }

    /// Bytes written to the append log, if persistence is on.
    pub fn log_bytes(&self) -> Option<u64> {
        self.inner.read().log.as_ref().map(AppendLog::bytes)
    }

    /// Every present record (expired included), sorted by key.
    pub fn snapshot(&self) -> Vec<PersonalRecord> {
        let inner = self.inner.read();
        let mut all: Vec<PersonalRecord> = inner.records.values().map(|r| PersonalRecord::clone(r)).collect();
        all.sort_unstable_by(|a, b| a.key.cmp(&b.key));
        all
    }

    /// Keys filed under `token` in the `attr` index, or `None` when that
    /// index is not maintained.
    pub fn index_lookup(&self, attr: IndexedAttr, token: &str) -> Option<Vec<String>> {
        let inner = self.inner.read();
        let idx = inner.token_index(attr)?;
        let mut keys: Vec<String> = idx.get(token).map(|k| k.to_string()).collect();
        keys.sort_unstable();
        Some(keys)
    }

    /// Verifies every index entry points at a present record holding that
    /// token, and every record is fully indexed.
    pub fn check_index_coherence(&self) -> std::result::Result<(), String> {
        let inner = self.inner.read();
        let mut expected_entries = 0usize;
        for attr in IndexedAttr::TOKEN {
            let Some(idx) = inner.token_index(attr) else { continue };
            let mut entries = 0usize;
            for (token, key) in idx.entries() {
                entries += 1;
                let r = inner.records.get(key).ok_or_else(|| format!("{} index: dangling key {key}", attr.name()))?;
                let tokens = tokens_of(attr, &r.meta);
                let ok = match token {
                    Some(t) => tokens.contains(&t),
                    None => tokens.is_empty(),
                };
                if !ok {
                    return Err(format!("{} index: {key} filed under {token:?} but holds {tokens:?}", attr.name()));
                }
            }
            let want: usize = inner.records.values().map(|r| tokens_of(attr, &r.meta).len().max(1)).sum();
            if entries != want {
                return Err(format!("{} index has {entries} entries, records need {want}", attr.name()));
            }
            expected_entries += entries;
        }
        if let Some(exp) = inner.expiry.as_ref() {
            if exp.len() != inner.records.len() {
                return Err(format!("expiry index has {} entries for {} records", exp.len(), inner.records.len()));
            }
            for (e, k) in exp {
                let r = inner.records.get(k).ok_or_else(|| format!("expiry index: dangling key {k}"))?;
                if r.expiry_ms() != *e {
                    return Err(format!("expiry index: {k} filed at {e}, expires at {}", r.expiry_ms()));
                }
            }
        }
        let _ = expected_entries;
        Ok(())
    }
}
