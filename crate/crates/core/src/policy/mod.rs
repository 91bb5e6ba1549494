//! Role-based access control and the audit trail.
//!
//! [`authorize`] is a pure function of the role and the query shape. Checks
//! that depend on stored state (ownership of a by-key target) are returned as
//! [`Decision::AllowFiltered`] and enforced by the engine.

pub mod audit;

use std::fmt;
use std::str::FromStr;

use crate::api::GdprQuery;
use crate::error::{Error, Result};
use crate::record::{is_valid_token, Attribute};
use crate::store::{EditOp, Selector};

pub use audit::{AuditEntry, AuditLog, DeletionStatus, Outcome};

/// Who issues a query. Actor tokens follow record token rules and may not
/// contain `|`, which separates audit fields.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Role {
    Controller,
    Customer(String),
    Processor(String),
    Regulator(String),
}

/// Placeholder actor for roles issued without one.
pub const NO_ACTOR: &str = "-";

impl Role {
    pub fn name(&self) -> &'static str {
        match self {
            Role::Controller => "controller",
            Role::Customer(_) => "customer",
            Role::Processor(_) => "processor",
            Role::Regulator(_) => "regulator",
        }
    }

    pub fn actor(&self) -> &str {
        match self {
            Role::Controller => NO_ACTOR,
            Role::Customer(a) | Role::Processor(a) | Role::Regulator(a) => a,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Controller => f.write_str("controller"),
            other => write!(f, "{}:{}", other.name(), other.actor()),
        }
    }
}

impl FromStr for Role {
    type Err = Error;

    /// `controller`, `customer:<usr>`, `processor[:<id>]`, `regulator[:<id>]`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, actor) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        if let Some(a) = actor {
            if !is_valid_token(a) || a.contains('|') {
                return Err(Error::Malformed(format!("invalid actor token {a:?}")));
            }
        }
        let actor_or_default = || actor.unwrap_or(NO_ACTOR).to_string();
        match name.to_ascii_lowercase().as_str() {
            "controller" if actor.is_none() => Ok(Role::Controller),
            "customer" => actor
                .map(|a| Role::Customer(a.to_string()))
                .ok_or_else(|| Error::Malformed("customer role needs a user token".into())),
            "processor" => Ok(Role::Processor(actor_or_default())),
            "regulator" => Ok(Role::Regulator(actor_or_default())),
            _ => Err(Error::Malformed(format!("unknown role {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DenyReason {
    /// The role may never issue this query.
    RoleForbidden,
    /// The query targets another user's records.
    NotOwner,
    /// The role may issue this query but not edit this attribute this way.
    AttributeForbidden,
}

impl DenyReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DenyReason::RoleForbidden => "role-forbidden",
            DenyReason::NotOwner => "not-owner",
            DenyReason::AttributeForbidden => "attribute-forbidden",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [DenyReason::RoleForbidden, DenyReason::NotOwner, DenyReason::AttributeForbidden]
            .into_iter()
            .find(|r| r.as_str() == s.trim())
    }
}

impl fmt::Display for DenyReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Constraint {
    /// The targeted record must belong to this user.
    Owner(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Decision {
    Allow,
    AllowFiltered(Constraint),
    Deny(DenyReason),
}

impl Decision {
    pub fn is_allowed(&self) -> bool {
        !matches!(self, Decision::Deny(_))
    }
}

/// Access matrix:
///
/// | role       | may issue                                                        |
/// |------------|------------------------------------------------------------------|
/// | controller | everything                                                       |
/// | customer   | by-key reads, updates and delete on own records; by-usr on self; |
/// |            | metadata edits limited to OBJ and PUR; features                  |
/// | processor  | READ-DATA by KEY/PUR/OBJ/DEC; UPDATE-METADATA adding DEC; features |
/// | regulator  | READ-METADATA, GET-SYSTEM-LOGS, VERIFY-DELETION, features        |
pub fn authorize(role: &Role, query: &GdprQuery) -> Decision {
    use Decision::*;
    use DenyReason::*;
    match role {
        Role::Controller => Allow,
        Role::Customer(me) => {
            let owner = || AllowFiltered(Constraint::Owner(me.clone()));
            let self_only = |u: &str| if u == me { Allow } else { Deny(NotOwner) };
            match query {
                GdprQuery::ReadData(Selector::Key(_))
                | GdprQuery::ReadMetadata(Selector::Key(_))
                | GdprQuery::DeleteRecord(Selector::Key(_))
                | GdprQuery::UpdateData { .. } => owner(),
                GdprQuery::ReadData(Selector::Usr(u))
                | GdprQuery::ReadMetadata(Selector::Usr(u))
                | GdprQuery::DeleteRecord(Selector::Usr(u)) => self_only(u),
                GdprQuery::UpdateMetadata { selector, edit } => {
                    if !matches!(edit.attribute(), Attribute::Obj | Attribute::Pur) {
                        return Deny(AttributeForbidden);
                    }
                    match selector {
                        Selector::Key(_) => owner(),
                        Selector::Usr(u) => self_only(u),
                        _ => Deny(RoleForbidden),
                    }
                }
                GdprQuery::GetSystemFeatures => Allow,
                _ => Deny(RoleForbidden),
            }
        }
        Role::Processor(_) => match query {
            GdprQuery::ReadData(
                Selector::Key(_) | Selector::Pur(_) | Selector::ObjAbsent(_) | Selector::DecAllowed,
            ) => Allow,
            GdprQuery::UpdateMetadata { edit, .. } => {
                if edit.attribute() == Attribute::Dec && edit.op() == EditOp::Add {
                    Allow
                } else {
                    Deny(AttributeForbidden)
                }
            }
            GdprQuery::GetSystemFeatures => Allow,
            _ => Deny(RoleForbidden),
        },
        Role::Regulator(_) => match query {
            GdprQuery::ReadMetadata(_)
            | GdprQuery::GetSystemLogs { .. }
            | GdprQuery::GetSystemFeatures
            | GdprQuery::VerifyDeletion(_) => Allow,
            _ => Deny(RoleForbidden),
        },
    }
}
