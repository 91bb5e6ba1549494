//! Fixtures shared by the integration tests.

#![allow(dead_code)]

use gdprkv::api::{BackendDriver, GdprQuery};
use gdprkv::policy::Role;
use gdprkv::record::{Metadata, PersonalRecord, ValueSet};
use gdprkv::store::{EditOp, MetadataEdit, Selector};
use gdprkv::workload::{GeneratedOp, Generator, LoadSpec, WorkloadName, WorkloadSpec};
use proptest::collection::vec;
use proptest::prelude::*;

/// Printable ASCII without the field and list separators or `=`.
pub const TOKEN: &str = "[!-+\\--:<>-~]{1,10}";

/// Up to four distinct values in arbitrary order.
pub fn token_set() -> impl Strategy<Value = ValueSet> {
    vec(TOKEN, 0..5).prop_map(|v| v.into_iter().take(4).collect())
}

pub fn arb_metadata() -> impl Strategy<Value = Metadata> {
    (token_set(), 0u64..10_000_000, TOKEN, token_set(), token_set(), token_set(), token_set())
        .prop_map(|(pur, ttl, usr, obj, dec, shr, src)| Metadata { pur, ttl, usr, obj, dec, shr, src })
}

pub fn arb_record() -> impl Strategy<Value = PersonalRecord> {
    (TOKEN, TOKEN, arb_metadata()).prop_map(|(k, d, m)| PersonalRecord::new(k, d, m))
}

// ---------------------------------------------------------------------------
// Access decision table, transcribed from the role/data-flow matrix rather
// than from the policy code. Rows are matched top to bottom; `*` matches
// anything. Scope is `self`/`other` for USR selectors and `-` otherwise.
// ---------------------------------------------------------------------------

pub const DECISION_TABLE: &[(&str, &str, &str, &str, &str, &str)] = &[
    // role       op                        scope    attr   edit     verdict
    ("controller", "*", "*", "*", "*", "allow"),
    ("customer", "READ-DATA-BY-KEY", "*", "*", "*", "owner"),
    ("customer", "READ-METADATA-BY-KEY", "*", "*", "*", "owner"),
    ("customer", "UPDATE-DATA-BY-KEY", "*", "*", "*", "owner"),
    ("customer", "DELETE-RECORD-BY-KEY", "*", "*", "*", "owner"),
    ("customer", "READ-DATA-BY-USR", "self", "*", "*", "allow"),
    ("customer", "READ-METADATA-BY-USR", "self", "*", "*", "allow"),
    ("customer", "DELETE-RECORD-BY-USR", "self", "*", "*", "allow"),
    ("customer", "READ-DATA-BY-USR", "other", "*", "*", "deny:not-owner"),
    ("customer", "READ-METADATA-BY-USR", "other", "*", "*", "deny:not-owner"),
    ("customer", "DELETE-RECORD-BY-USR", "other", "*", "*", "deny:not-owner"),
    ("customer", "UPDATE-METADATA-BY-*", "*", "TTL", "*", "deny:attribute-forbidden"),
    ("customer", "UPDATE-METADATA-BY-*", "*", "DEC", "*", "deny:attribute-forbidden"),
    ("customer", "UPDATE-METADATA-BY-*", "*", "SHR", "*", "deny:attribute-forbidden"),
    ("customer", "UPDATE-METADATA-BY-KEY", "*", "*", "*", "owner"),
    ("customer", "UPDATE-METADATA-BY-USR", "self", "*", "*", "allow"),
    ("customer", "UPDATE-METADATA-BY-USR", "other", "*", "*", "deny:not-owner"),
    ("customer", "GET-SYSTEM-FEATURES", "*", "*", "*", "allow"),
    ("customer", "*", "*", "*", "*", "deny:role-forbidden"),
    ("processor", "READ-DATA-BY-KEY", "*", "*", "*", "allow"),
    ("processor", "READ-DATA-BY-PUR", "*", "*", "*", "allow"),
    ("processor", "READ-DATA-BY-OBJ", "*", "*", "*", "allow"),
    ("processor", "READ-DATA-BY-DEC", "*", "*", "*", "allow"),
    ("processor", "UPDATE-METADATA-BY-*", "*", "DEC", "add", "allow"),
    ("processor", "UPDATE-METADATA-BY-*", "*", "*", "*", "deny:attribute-forbidden"),
    ("processor", "GET-SYSTEM-FEATURES", "*", "*", "*", "allow"),
    ("processor", "*", "*", "*", "*", "deny:role-forbidden"),
    ("regulator", "READ-METADATA-BY-*", "*", "*", "*", "allow"),
    ("regulator", "GET-SYSTEM-LOGS", "*", "*", "*", "allow"),
    ("regulator", "GET-SYSTEM-FEATURES", "*", "*", "*", "allow"),
    ("regulator", "VERIFY-DELETION", "*", "*", "*", "allow"),
    ("regulator", "*", "*", "*", "*", "deny:role-forbidden"),
];

fn glob(pattern: &str, s: &str) -> bool {
    match pattern.strip_suffix('*') {
        Some(prefix) => s.starts_with(prefix),
        None => pattern == s,
    }
}

/// Expected verdict for one enumerated case.
pub fn table_verdict(role: &str, op: &str, scope: &str, attr: &str, edit: &str) -> &'static str {
    DECISION_TABLE
        .iter()
        .find(|(r, o, s, a, e, _)| *r == role && glob(o, op) && glob(s, scope) && glob(a, attr) && glob(e, edit))
        .map(|row| row.5)
        .expect("table has a catch-all per role")
}

pub const ME: &str = "neo";
pub const OTHER: &str = "morpheus";

pub fn roles() -> Vec<Role> {
    vec![
        Role::Controller,
        Role::Customer(ME.into()),
        Role::Processor("analytics".into()),
        Role::Regulator("dpa".into()),
    ]
}

#[derive(Debug, Clone)]
pub struct Case {
    pub query: GdprQuery,
    pub scope: &'static str,
    pub attr: &'static str,
    pub edit: &'static str,
}

fn case(query: GdprQuery, scope: &'static str) -> Case {
    Case { query, scope, attr: "-", edit: "-" }
}

fn selectors(dims: &[&str]) -> Vec<(Selector, &'static str)> {
    let mut out = Vec::new();
    for d in dims {
        match *d {
            "KEY" => out.push((Selector::Key("k0000001".into()), "-")),
            "PUR" => out.push((Selector::Pur("ads".into()), "-")),
            "TTL" => out.push((Selector::ExpiredOnly, "-")),
            "USR" => {
                out.push((Selector::Usr(ME.into()), "self"));
                out.push((Selector::Usr(OTHER.into()), "other"));
            }
            "OBJ" => out.push((Selector::ObjAbsent("ads".into()), "-")),
            "DEC" => out.push((Selector::DecAllowed, "-")),
            "SHR" => out.push((Selector::Shr("acme".into()), "-")),
            _ => unreachable!(),
        }
    }
    out
}

/// Every well-formed query shape: each family and dimension, both USR
/// scopes, and every mutable attribute under every edit op it accepts.
pub fn enumerate_cases() -> Vec<Case> {
    let meta = Metadata { ttl: 60, usr: ME.into(), ..Default::default() };
    let mut out = vec![case(GdprQuery::CreateRecord(PersonalRecord::new("k0000001", "d", meta)), "-")];
    for (sel, scope) in selectors(&["KEY", "PUR", "TTL", "USR"]) {
        out.push(case(GdprQuery::DeleteRecord(sel), scope));
    }
    for (sel, scope) in selectors(&["KEY", "PUR", "USR", "OBJ", "DEC"]) {
        out.push(case(GdprQuery::ReadData(sel), scope));
    }
    for (sel, scope) in selectors(&["KEY", "USR", "SHR"]) {
        out.push(case(GdprQuery::ReadMetadata(sel), scope));
    }
    out.push(case(GdprQuery::UpdateData { key: "k0000001".into(), data: "new".into() }, "-"));
    let attrs: [(&str, &[EditOp]); 5] = [
        ("PUR", &[EditOp::Add, EditOp::Remove, EditOp::Set]),
        ("TTL", &[EditOp::Set]),
        ("OBJ", &[EditOp::Add, EditOp::Remove, EditOp::Set]),
        ("DEC", &[EditOp::Add, EditOp::Remove, EditOp::Set]),
        ("SHR", &[EditOp::Add, EditOp::Remove, EditOp::Set]),
    ];
    for (sel, scope) in selectors(&["KEY", "PUR", "USR", "SHR"]) {
        for (attr, ops) in attrs {
            for op in ops {
                let value = if attr == "TTL" { "0" } else { "ads" };
                let edit = MetadataEdit::parse(*op, &format!("{attr}={value}")).expect("valid edit");
                out.push(Case {
                    query: GdprQuery::UpdateMetadata { selector: sel.clone(), edit },
                    scope,
                    attr,
                    edit: op.as_str(),
                });
            }
        }
    }
    out.push(case(GdprQuery::GetSystemLogs { start: 0, end: 1000 }, "-"));
    out.push(case(GdprQuery::GetSystemFeatures, "-"));
    out.push(case(GdprQuery::VerifyDeletion("k0000001".into()), "-"));
    out
}

/// Loads `load` and generates `per_workload` ops for each workload, each
/// stamped with the logical instant it should run at (10 ms apart).
pub fn script(
    load: &LoadSpec,
    seed: u64,
    per_workload: usize,
    misuse: f64,
) -> (Vec<GeneratedOp>, Vec<(u64, GeneratedOp)>) {
    let mut gen = Generator::new(load, 0, seed);
    gen.set_misuse_share(misuse);
    let loaded = gen.load_ops(0);
    gen.begin_run(0);
    let mut now = 0;
    let mut ops = Vec::new();
    for name in WorkloadName::ALL {
        let spec = WorkloadSpec::new(name).with_operations(per_workload);
        for _ in 0..per_workload {
            now += 10;
            ops.push((now, gen.next_operation(&spec, now)));
        }
    }
    (loaded, ops)
}

/// Comparable view of one response: its class plus its lines.
pub type Observed = (String, Option<Vec<String>>);

/// Replays a script on a logical-clock backend, reaping every 500 ms.
pub fn replay(driver: &dyn BackendDriver, loaded: &[GeneratedOp], ops: &[(u64, GeneratedOp)]) -> Vec<Observed> {
    let mut out = Vec::new();
    let mut observe = |op: &GeneratedOp| {
        let got = driver.execute(&op.role, &op.query);
        out.push((gdprkv::api::response_class(&got), got.ok().map(|r| r.to_lines())));
    };
    for op in loaded {
        observe(op);
    }
    let (mut clock, mut next_reap) = (0u64, 500u64);
    for (t, op) in ops {
        driver.advance(t - clock).expect("advance");
        clock = *t;
        while clock >= next_reap {
            driver.reap().expect("reap");
            next_reap += 500;
        }
        observe(op);
    }
    out
}
