use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::load::LoadSpec;
use super::spec::{Template, WorkloadName, WorkloadSpec};
use super::zipf::{DistributionKind, RankSampler};
use crate::api::{wire, GdprQuery};
use crate::policy::Role;
use crate::record::{Attribute, PersonalRecord, ValueSet};
use crate::store::{EditOp, Erased, IndexSet, MetadataEdit, Selector, Store, AUTOMATED};

/// Templates are scheduled in shuffled blocks of this many draws, so counts
/// track the weights to within one block's rounding.
const URN_BLOCK: usize = 1200;

pub const PROCESSOR_ACTOR: &str = "analytics";
pub const REGULATOR_ACTOR: &str = "dpa";

/// One generated request. `template` is `None` for creates the generator
/// inserted because a template had no live key to act on.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedOp {
    pub role: Role,
    pub query: GdprQuery,
    pub template: Option<Template>,
}

impl GeneratedOp {
    pub fn line(&self) -> String {
        wire::format_query(&self.role, &self.query)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GeneratorStats {
    /// Creates inserted ahead of a dependent op.
    pub fillers: u64,
    /// Controller draws swapped to keep creates and deletes level.
    pub rebalanced: u64,
    /// Ops issued under an unauthorized role.
    pub misused: u64,
}

/// Insertion-ordered key set with O(1) removal and indexed access.
#[derive(Debug, Default, Clone)]
struct KeySet {
    keys: Vec<Arc<str>>,
    pos: HashMap<Arc<str>, usize>,
}

impl KeySet {
    fn insert(&mut self, k: Arc<str>) {
        if !self.pos.contains_key(&k) {
            self.pos.insert(k.clone(), self.keys.len());
            self.keys.push(k);
        }
    }

    fn remove(&mut self, k: &str) -> bool {
        let Some(i) = self.pos.remove(k) else { return false };
        self.keys.swap_remove(i);
        if let Some(moved) = self.keys.get(i) {
            self.pos.insert(moved.clone(), i);
        }
        true
    }

    fn len(&self) -> usize {
        self.keys.len()
    }

    fn pick<R: Rng>(&self, rng: &mut R) -> Option<&Arc<str>> {
        if self.keys.is_empty() {
            None
        } else {
            Some(&self.keys[rng.random_range(0..self.keys.len())])
        }
    }
}

#[derive(Debug, Default)]
struct Urn {
    bag: Vec<Template>,
}

impl Urn {
    fn draw<R: Rng>(&mut self, spec: &WorkloadSpec, rng: &mut R) -> Template {
        if self.bag.is_empty() {
            self.bag = block(spec);
        }
        let i = rng.random_range(0..self.bag.len());
        self.bag.swap_remove(i)
    }
}

/// Largest-remainder apportionment of one urn block.
fn block(spec: &WorkloadSpec) -> Vec<Template> {
    let total: f64 = spec.weights.iter().map(|(_, w)| w).sum();
    let exact: Vec<f64> = spec.weights.iter().map(|(_, w)| w / total * URN_BLOCK as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..exact.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let short = URN_BLOCK - counts.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        counts[i] += 1;
    }
    spec.weights.iter().zip(counts).flat_map(|((t, _), n)| std::iter::repeat_n(*t, n)).collect()
}

/// Per-worker operation generator.
///
/// It keeps a model of its partition (a store plus live/deleted key sets) and
/// applies each emitted operation to it, so later draws never target a key
/// that is already gone and creates never reuse a key.
#[derive(Debug)]
pub struct Generator {
    load: LoadSpec,
    partition: usize,
    rng: ChaCha8Rng,
    model: Store,
    live: KeySet,
    owner: HashMap<Arc<str>, usize>,
    by_user: HashMap<usize, KeySet>,
    erased: Vec<Arc<str>>,
    erased_by_user: HashMap<usize, Vec<Arc<str>>>,
    next_index: u64,
    active_users: usize,
    urns: HashMap<WorkloadName, Urn>,
    retry: Option<(Template, Option<usize>)>,
    run_start: Option<u64>,
    misuse_share: f64,
    creates: u64,
    deletes: u64,
    stats: GeneratorStats,
}

impl Generator {
    pub fn new(load: &LoadSpec, partition: usize, seed: u64) -> Generator {
        assert!(partition < load.partitions, "partition out of range");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(partition as u64 + 1);
        Generator {
            load: load.clone(),
            partition,
            rng,
            model: Store::in_memory(IndexSet::all()),
            live: KeySet::default(),
            owner: HashMap::new(),
            by_user: HashMap::new(),
            erased: Vec::new(),
            erased_by_user: HashMap::new(),
            next_index: load.record_count as u64 + partition as u64,
            active_users: load.users,
            urns: HashMap::new(),
            retry: None,
            run_start: None,
            misuse_share: 0.0,
            creates: 0,
            deletes: 0,
            stats: GeneratorStats::default(),
        }
    }

    /// Restricts user-skewed templates to the first `n` users of the
    /// population, e.g. the original customers after the data set grew.
    pub fn set_active_users(&mut self, n: usize) {
        self.active_users = n.clamp(1, self.load.users);
    }

    /// Share of template ops re-issued under a role that must be denied.
    /// Denied ops change nothing, so the model skips them.
    pub fn set_misuse_share(&mut self, share: f64) {
        self.misuse_share = share.clamp(0.0, 1.0);
    }

    pub fn stats(&self) -> GeneratorStats {
        self.stats
    }

    pub fn live_keys(&self) -> usize {
        self.live.len()
    }

    /// Load-phase creates for this partition, applied to the model at `now`.
    pub fn load_ops(&mut self, now_ms: u64) -> Vec<GeneratedOp> {
        let w = self.load.partitions as u64;
        let ops: Vec<GeneratedOp> = (self.partition as u64..self.load.record_count as u64)
            .step_by(w as usize)
            .map(|i| GeneratedOp {
                role: Role::Controller,
                query: GdprQuery::CreateRecord(self.load.record(i)),
                template: None,
            })
            .collect();
        for op in &ops {
            self.apply(op, now_ms);
        }
        ops
    }

    /// Marks the instant log ranges are measured from.
    pub fn begin_run(&mut self, now_ms: u64) {
        self.run_start = Some(now_ms);
    }

    pub fn next_operation(&mut self, spec: &WorkloadSpec, now_ms: u64) -> GeneratedOp {
        self.observe_expiry(now_ms);
        let run_start = *self.run_start.get_or_insert(now_ms);
        let (template, user) = match self.retry.take() {
            Some(r) => r,
            None => {
                let t = self.draw(spec);
                let user = match t.workload() {
                    WorkloadName::Customer | WorkloadName::Regulator => Some(self.pick_user(spec.distribution)),
                    _ => None,
                };
                (t, user)
            }
        };
        let op = match self.build(template, user, spec, now_ms, run_start) {
            Some(mut op) => {
                if self.misuse_share > 0.0 && self.rng.random_bool(self.misuse_share) {
                    op.role = misuse_role(template.workload());
                    self.stats.misused += 1;
                    return op;
                }
                op
            }
            None => {
                self.stats.fillers += 1;
                self.retry = Some((template, user));
                let record = self.fresh_record(user);
                GeneratedOp { role: Role::Controller, query: GdprQuery::CreateRecord(record), template: None }
            }
        };
        self.apply(&op, now_ms);
        op
    }

    fn draw(&mut self, spec: &WorkloadSpec) -> Template {
        let t = self.urns.entry(spec.name).or_default().draw(spec, &mut self.rng);
        if spec.name != WorkloadName::Controller {
            return t;
        }
        let slack = (spec.operation_count as u64 / 200).max(1);
        let deletes: Vec<Template> =
            spec.weights.iter().filter(|(t, w)| t.is_delete() && *w > 0.0).map(|(t, _)| *t).collect();
        let t = if t == Template::CreateRecord && self.creates >= self.deletes + slack && !deletes.is_empty() {
            self.stats.rebalanced += 1;
            deletes[self.rng.random_range(0..deletes.len())]
        } else if t.is_delete() && self.deletes >= self.creates + slack && spec.weight(Template::CreateRecord) > 0.0 {
            self.stats.rebalanced += 1;
            Template::CreateRecord
        } else {
            t
        };
        if t == Template::CreateRecord {
            self.creates += 1;
        } else if t.is_delete() {
            self.deletes += 1;
        }
        t
    }

    /// Local user index for rank-based selection within this partition.
    fn pick_user(&mut self, dist: DistributionKind) -> usize {
        let w = self.load.partitions;
        let n = (self.active_users / w).max(1);
        let sampler = RankSampler::new(dist, n).expect("valid distribution");
        (sampler.sample(&mut self.rng) - 1) * w + self.partition
    }

    fn fresh_record(&mut self, user: Option<usize>) -> PersonalRecord {
        let i = self.next_index;
        self.next_index += self.load.partitions as u64;
        let mut r = self.load.record(i);
        if let Some(u) = user {
            r.meta.usr = self.load.user(u);
        }
        r
    }

    fn random_live(&mut self) -> Option<Arc<PersonalRecord>> {
        let key = self.live.pick(&mut self.rng)?.clone();
        self.model.read_records(&Selector::Key(key.to_string()), 0).ok()?.pop()
    }

    fn build(
        &mut self,
        t: Template,
        user: Option<usize>,
        spec: &WorkloadSpec,
        now_ms: u64,
        run_start: u64,
    ) -> Option<GeneratedOp> {
        use Template::*;
        let customer = |g: &Generator| Role::Customer(g.load.user(user.expect("customer ops carry a user")));
        let processor = Role::Processor(PROCESSOR_ACTOR.into());
        let regulator = Role::Regulator(REGULATOR_ACTOR.into());
        let (role, query) = match t {
            CreateRecord => (Role::Controller, GdprQuery::CreateRecord(self.fresh_record(None))),
            DeleteByPur => {
                let r = self.random_live()?;
                (Role::Controller, GdprQuery::DeleteRecord(Selector::Pur(first(&r.meta.pur)?)))
            }
            DeleteByUsr => {
                let r = self.random_live()?;
                (Role::Controller, GdprQuery::DeleteRecord(Selector::Usr(r.meta.usr.clone())))
            }
            DeleteByTtl => (Role::Controller, GdprQuery::DeleteRecord(Selector::ExpiredOnly)),
            UpdateMetadataByPur | UpdateMetadataByUsr | UpdateMetadataByShr => {
                let r = self.random_live()?;
                let selector = match t {
                    UpdateMetadataByPur => Selector::Pur(first(&r.meta.pur)?),
                    UpdateMetadataByUsr => Selector::Usr(r.meta.usr.clone()),
                    _ => match first(&r.meta.shr) {
                        Some(s) => Selector::Shr(s),
                        None => Selector::Shr(self.load.partner(self.partition)),
                    },
                };
                // By-SHR updates revoke the selected partner. Adding one there
                // would spread every partner to every record over a long run.
                let (op, partner) = match &selector {
                    Selector::Shr(p) => (EditOp::Remove, p.clone()),
                    _ => (
                        EditOp::Add,
                        self.load.partner(self.load.local_index(&mut self.rng, self.load.partners, self.partition)),
                    ),
                };
                let edit = MetadataEdit::new(Attribute::Shr, op, ValueSet::from([partner])).ok()?;
                (Role::Controller, GdprQuery::UpdateMetadata { selector, edit })
            }
            ReadDataByUsr => (customer(self), GdprQuery::ReadData(Selector::Usr(self.load.user(user?)))),
            ReadMetadataByKey | UpdateDataByKey | UpdateMetadataByKey | DeleteByKey => {
                let key = self.by_user.get(&user?)?.pick(&mut self.rng)?.to_string();
                let query = match t {
                    ReadMetadataByKey => GdprQuery::ReadMetadata(Selector::Key(key)),
                    UpdateDataByKey => {
                        let data: String = (0..self.load.data_len)
                            .map(|_| char::from(b'0' + self.rng.random_range(0..10u8)))
                            .collect();
                        GdprQuery::UpdateData { key, data }
                    }
                    UpdateMetadataByKey => {
                        let edit = self.objection_edit(&key)?;
                        GdprQuery::UpdateMetadata { selector: Selector::Key(key), edit }
                    }
                    _ => GdprQuery::DeleteRecord(Selector::Key(key)),
                };
                (customer(self), query)
            }
            ReadDataByKey => {
                let n = self.live.len();
                if n == 0 {
                    return None;
                }
                let rank = RankSampler::new(spec.distribution, n).expect("valid distribution").sample(&mut self.rng);
                (processor, GdprQuery::ReadData(Selector::Key(self.live.keys[rank - 1].to_string())))
            }
            ReadDataByPur => {
                let r = self.random_live()?;
                (processor, GdprQuery::ReadData(Selector::Pur(first(&r.meta.pur)?)))
            }
            ReadDataByObj => {
                let p = self.load.purpose(self.load.local_index(&mut self.rng, self.load.purposes, self.partition));
                (processor, GdprQuery::ReadData(Selector::ObjAbsent(p)))
            }
            ReadDataByDec => (processor, GdprQuery::ReadData(Selector::DecAllowed)),
            ReadMetadataByUsr => (regulator, GdprQuery::ReadMetadata(Selector::Usr(self.load.user(user?)))),
            GetSystemLogs => {
                let elapsed = now_ms.saturating_sub(run_start);
                let len = self.rng.random_range(0..=elapsed / 5);
                let start = run_start + self.rng.random_range(0..=elapsed - len);
                (regulator, GdprQuery::GetSystemLogs { start, end: start + len })
            }
            VerifyDeletion => {
                let key = match self.erased_by_user.get(&user?).filter(|v| !v.is_empty()) {
                    Some(v) => v[self.rng.random_range(0..v.len())].clone(),
                    None if !self.erased.is_empty() => self.erased[self.rng.random_range(0..self.erased.len())].clone(),
                    None => self.live.pick(&mut self.rng)?.clone(),
                };
                (regulator, GdprQuery::VerifyDeletion(key.to_string()))
            }
        };
        Some(GeneratedOp { role, query, template: Some(t) })
    }

    /// Customer objection edits: object to one of the record's purposes,
    /// withdraw from automated decisions, or lift an existing objection.
    fn objection_edit(&mut self, key: &str) -> Option<MetadataEdit> {
        let meta = self.model.read_metadata(&Selector::Key(key.to_string()), 0).ok()?.pop()?.1;
        let (op, value) = match self.rng.random_range(0..3u8) {
            0 => (EditOp::Add, first(&meta.pur)?),
            1 => (EditOp::Add, AUTOMATED.to_string()),
            _ => match first(&meta.obj) {
                Some(o) => (EditOp::Remove, o),
                None => (EditOp::Add, first(&meta.pur)?),
            },
        };
        MetadataEdit::new(Attribute::Obj, op, ValueSet::from([value])).ok()
    }

    fn observe_expiry(&mut self, now_ms: u64) {
        if let Ok(gone) = self.model.run_reaper_once(now_ms) {
            self.forget(&gone);
        }
    }

    fn forget(&mut self, gone: &[Erased]) {
        for e in gone {
            let Some((key, user)) = self.owner.remove_entry(e.key.as_str()) else { continue };
            self.live.remove(&key);
            if let Some(set) = self.by_user.get_mut(&user) {
                set.remove(&key);
            }
            self.erased.push(key.clone());
            self.erased_by_user.entry(user).or_default().push(key);
        }
    }

    fn apply(&mut self, op: &GeneratedOp, now_ms: u64) {
        match &op.query {
            GdprQuery::CreateRecord(r) => {
                let user = self.user_index(&r.meta.usr);
                if self.model.put_record(r.clone(), now_ms).is_ok() {
                    let key: Arc<str> = Arc::from(r.key.as_str());
                    self.live.insert(key.clone());
                    self.by_user.entry(user).or_default().insert(key.clone());
                    self.owner.insert(key, user);
                }
            }
            GdprQuery::DeleteRecord(sel) => {
                if let Ok(gone) = self.model.delete_records(sel, now_ms) {
                    self.forget(&gone);
                }
            }
            GdprQuery::UpdateData { key, data } => {
                let _ = self.model.update_data(key, data, now_ms);
            }
            GdprQuery::UpdateMetadata { selector, edit } => {
                let _ = self.model.update_metadata(selector, edit, now_ms);
            }
            _ => {}
        }
    }

    fn user_index(&self, usr: &str) -> usize {
        usr.get(1..).and_then(|n| n.parse().ok()).unwrap_or(usize::MAX)
    }
}

/// A role the policy denies for every template of `workload`.
fn misuse_role(workload: WorkloadName) -> Role {
    match workload {
        WorkloadName::Controller | WorkloadName::Regulator => Role::Processor(PROCESSOR_ACTOR.into()),
        WorkloadName::Customer => Role::Customer("intruder".into()),
        WorkloadName::Processor => Role::Regulator(REGULATOR_ACTOR.into()),
    }
}

fn first(set: &ValueSet) -> Option<String> {
    set.iter().next().cloned()
}

/// Checks that a timed trace respects the record lifecycle: keys are created
/// once, and by-key reads, updates and deletes only target live keys.
/// Verify-deletion is exempt because it asks about erased keys by design.
pub fn validate_lifecycle(trace: &[(u64, GeneratedOp)]) -> Result<(), String> {
    let store = Store::in_memory(IndexSet::all());
    let mut seen = std::collections::HashSet::new();
    for (n, (now, op)) in trace.iter().enumerate() {
        store.run_reaper_once(*now).map_err(|e| e.to_string())?;
        let q = &op.query;
        match q {
            GdprQuery::CreateRecord(r) => {
                if !seen.insert(r.key.clone()) {
                    return Err(format!("op {n}: duplicate create of {}", r.key));
                }
                store.put_record(r.clone(), *now).map_err(|e| format!("op {n}: {e}"))?;
                continue;
            }
            GdprQuery::VerifyDeletion(_) => continue,
            _ => {}
        }
        if let Some(k) = q.target_key() {
            if !store.contains(k) {
                return Err(format!("op {n}: {} targets {k}, which is not live", q.op_name()));
            }
        }
        match q {
            GdprQuery::DeleteRecord(sel) => {
                store.delete_records(sel, *now).map_err(|e| e.to_string())?;
            }
            GdprQuery::UpdateData { key, data } => store.update_data(key, data, *now).map_err(|e| e.to_string())?,
            GdprQuery::UpdateMetadata { selector, edit } => {
                store.update_metadata(selector, edit, *now).map_err(|e| e.to_string())?;
            }
            _ => {}
        }
    }
    Ok(())
}
