//! Access decisions against the hand-written decision table, both at the
//! policy layer and through a live engine with its audit trail.

mod common;

use std::sync::Arc;

use common::{enumerate_cases, table_verdict, Case, ME, OTHER};
use gdprkv::api::query::{is_valid_pair, op_name, parse_op_name, Dimension, Family};
use gdprkv::api::{Engine, GdprQuery};
use gdprkv::policy::{authorize, Constraint, Decision, Outcome, Role};
use gdprkv::record::{Metadata, PersonalRecord};
use gdprkv::store::{Selector, StoreConfig};
use gdprkv::ErrorCode;
use proptest::prelude::*;
use proptest::sample::select;

const ACTORS: &[&str] = &[ME, OTHER, "trinity"];

/// Valid operation names, transcribed from the query taxonomy.
const OPS: &[&str] = &[
    "CREATE-RECORD",
    "DELETE-RECORD-BY-KEY",
    "DELETE-RECORD-BY-PUR",
    "DELETE-RECORD-BY-TTL",
    "DELETE-RECORD-BY-USR",
    "READ-DATA-BY-KEY",
    "READ-DATA-BY-PUR",
    "READ-DATA-BY-USR",
    "READ-DATA-BY-OBJ",
    "READ-DATA-BY-DEC",
    "READ-METADATA-BY-KEY",
    "READ-METADATA-BY-USR",
    "READ-METADATA-BY-SHR",
    "UPDATE-DATA-BY-KEY",
    "UPDATE-METADATA-BY-KEY",
    "UPDATE-METADATA-BY-PUR",
    "UPDATE-METADATA-BY-USR",
    "UPDATE-METADATA-BY-SHR",
    "GET-SYSTEM-LOGS",
    "GET-SYSTEM-FEATURES",
    "VERIFY-DELETION",
];

fn role(kind: usize, actor: &str) -> Role {
    match kind {
        0 => Role::Controller,
        1 => Role::Customer(actor.into()),
        2 => Role::Processor(actor.into()),
        _ => Role::Regulator(actor.into()),
    }
}

fn retarget_user(query: &GdprQuery, user: &str) -> GdprQuery {
    let swap = |s: &Selector| match s {
        Selector::Usr(_) => Selector::Usr(user.into()),
        other => other.clone(),
    };
    match query {
        GdprQuery::DeleteRecord(s) => GdprQuery::DeleteRecord(swap(s)),
        GdprQuery::ReadData(s) => GdprQuery::ReadData(swap(s)),
        GdprQuery::ReadMetadata(s) => GdprQuery::ReadMetadata(swap(s)),
        GdprQuery::UpdateMetadata { selector, edit } => {
            GdprQuery::UpdateMetadata { selector: swap(selector), edit: edit.clone() }
        }
        other => other.clone(),
    }
}

fn verdict(d: &Decision) -> String {
    match d {
        Decision::Allow => "allow".into(),
        Decision::AllowFiltered(Constraint::Owner(_)) => "owner".into(),
        Decision::Deny(r) => format!("deny:{r}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn random_role_and_query_follow_the_table(
        kind in 0usize..4,
        actor in select(ACTORS),
        target in select(ACTORS),
        case in select(enumerate_cases()),
    ) {
        let role = role(kind, actor);
        let query = retarget_user(&case.query, target);
        let scope = if case.scope == "-" { "-" } else if target == actor { "self" } else { "other" };
        let got = authorize(&role, &query);
        let want = table_verdict(role.name(), &query.op_name(), scope, case.attr, case.edit);
        prop_assert_eq!(verdict(&got), want, "{} {}", role, query.op_name());
        if let Decision::AllowFiltered(Constraint::Owner(u)) = got {
            prop_assert_eq!(u, actor);
        }
    }
}

fn seeded_engine() -> Arc<Engine> {
    let engine = Arc::new(Engine::open(StoreConfig::logical()).unwrap());
    for (key, usr) in [("k0000001", ME), ("k0000002", OTHER)] {
        let meta = Metadata { ttl: 3600, usr: usr.into(), pur: ["ads".to_string()].into(), ..Default::default() };
        let create = GdprQuery::CreateRecord(PersonalRecord::new(key, "d", meta));
        engine.execute(&Role::Controller, &create).unwrap();
    }
    engine
}

fn with_key(case: &Case, key: &str) -> GdprQuery {
    match &case.query {
        GdprQuery::DeleteRecord(Selector::Key(_)) => GdprQuery::DeleteRecord(Selector::Key(key.into())),
        GdprQuery::ReadData(Selector::Key(_)) => GdprQuery::ReadData(Selector::Key(key.into())),
        GdprQuery::ReadMetadata(Selector::Key(_)) => GdprQuery::ReadMetadata(Selector::Key(key.into())),
        GdprQuery::UpdateData { data, .. } => GdprQuery::UpdateData { key: key.into(), data: data.clone() },
        GdprQuery::UpdateMetadata { selector: Selector::Key(_), edit } => {
            GdprQuery::UpdateMetadata { selector: Selector::Key(key.into()), edit: edit.clone() }
        }
        other => other.clone(),
    }
}

/// Every enumerated query, by every role, on own and foreign records:
/// the engine denies exactly what the table denies, owner rules included,
/// and each attempt leaves one audit entry with the matching outcome.
#[test]
fn engine_enforces_the_table_and_audits_every_attempt() {
    for role in common::roles() {
        for case in enumerate_cases() {
            for (key, owner) in [("k0000001", ME), ("k0000002", OTHER)] {
                let engine = seeded_engine();
                let query = with_key(&case, key);
                let op = query.op_name();
                let want = table_verdict(role.name(), &op, case.scope, case.attr, case.edit);
                let denied = want.starts_with("deny") || (want == "owner" && owner != ME);
                let before = engine.audit().len();
                let got = engine.execute(&role, &query);
                assert_eq!(
                    got.as_ref().err().map(|e| e.code()) == Some(ErrorCode::Denied),
                    denied,
                    "{role} {op} on {key}: {got:?}"
                );
                let entries = engine.audit().entries();
                assert_eq!(entries.len(), before + 1, "{role} {op}: audit entry missing");
                let last = entries.last().unwrap();
                assert_eq!(last.op, op);
                assert_eq!(last.outcome == Outcome::Denied, denied, "{role} {op}: outcome {}", last.outcome);
            }
        }
    }
}

#[test]
fn query_space_is_exactly_the_taxonomy() {
    let families = Family::GRID.into_iter().chain([Family::VerifyDeletion]);
    let mut valid = Vec::new();
    for f in families {
        for d in std::iter::once(None).chain(Dimension::ALL.into_iter().map(Some)) {
            let name = op_name(f, d);
            assert_eq!(parse_op_name(&name), Some((f, d)), "{name} does not parse back");
            if is_valid_pair(f, d) {
                valid.push(name);
            } else {
                let err = GdprQuery::parse(&name, "x").unwrap_err();
                assert_eq!(err.code(), ErrorCode::MalformedQuery, "{name}");
            }
        }
    }
    valid.sort();
    let mut want: Vec<String> = OPS.iter().map(|s| s.to_string()).collect();
    want.sort();
    assert_eq!(valid, want);
}

#[test]
fn every_enumerated_query_survives_its_text_form() {
    let cases = enumerate_cases();
    let mut names: Vec<String> = cases.iter().map(|c| c.query.op_name()).collect();
    names.sort();
    names.dedup();
    assert_eq!(names.len(), OPS.len(), "enumeration misses an operation");
    for c in cases {
        let op = c.query.op_name();
        let back = GdprQuery::parse(&op, &c.query.args_text()).unwrap();
        assert_eq!(back, c.query, "{op}");
    }
}

#[test]
fn regulator_reads_metadata_of_any_user_but_never_data() {
    let engine = seeded_engine();
    let regulator = Role::Regulator("dpa".into());
    for user in [ME, OTHER] {
        let got = engine.execute(&regulator, &GdprQuery::ReadMetadata(Selector::Usr(user.into()))).unwrap();
        let lines = got.to_lines();
        assert_eq!(lines.len(), 1);
        assert!(!lines[0].contains(";d;"), "payload leaked: {}", lines[0]);
    }
    for sel in [Selector::Key("k0000001".into()), Selector::Usr(ME.into()), Selector::DecAllowed] {
        let err = engine.execute(&regulator, &GdprQuery::ReadData(sel)).unwrap_err();
        assert_eq!(err.code(), ErrorCode::Denied);
    }
}
