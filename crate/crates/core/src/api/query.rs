use std::fmt;

use crate::error::{Error, Result};
use crate::record::{is_valid_token, parse_record, PersonalRecord};
use crate::store::{EditOp, MetadataEdit, Selector};

/// Query families. `VerifyDeletion` is the regulator's deletion check and
/// sits outside the family x dimension grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    CreateRecord,
    DeleteRecord,
    ReadData,
    ReadMetadata,
    UpdateData,
    UpdateMetadata,
    GetSystem,
    VerifyDeletion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dimension {
    Key,
    Pur,
    Ttl,
    Usr,
    Obj,
    Dec,
    Shr,
    Logs,
    Features,
}

impl Family {
    /// The seven grid families.
    pub const GRID: [Family; 7] = [
        Family::CreateRecord,
        Family::DeleteRecord,
        Family::ReadData,
        Family::ReadMetadata,
        Family::UpdateData,
        Family::UpdateMetadata,
        Family::GetSystem,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::CreateRecord => "CREATE-RECORD",
            Family::DeleteRecord => "DELETE-RECORD",
            Family::ReadData => "READ-DATA",
            Family::ReadMetadata => "READ-METADATA",
            Family::UpdateData => "UPDATE-DATA",
            Family::UpdateMetadata => "UPDATE-METADATA",
            Family::GetSystem => "GET-SYSTEM",
            Family::VerifyDeletion => "VERIFY-DELETION",
        }
    }

    /// Dimensions this family accepts. Empty means the family takes none.
    pub fn dimensions(self) -> &'static [Dimension] {
        use Dimension::*;
        match self {
            Family::CreateRecord | Family::VerifyDeletion => &[],
            Family::DeleteRecord => &[Key, Pur, Ttl, Usr],
            Family::ReadData => &[Key, Pur, Usr, Obj, Dec],
            Family::ReadMetadata => &[Key, Usr, Shr],
            Family::UpdateData => &[Key],
            Family::UpdateMetadata => &[Key, Pur, Usr, Shr],
            Family::GetSystem => &[Logs, Features],
        }
    }
}

impl Dimension {
    pub const ALL: [Dimension; 9] = [
        Dimension::Key,
        Dimension::Pur,
        Dimension::Ttl,
        Dimension::Usr,
        Dimension::Obj,
        Dimension::Dec,
        Dimension::Shr,
        Dimension::Logs,
        Dimension::Features,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Dimension::Key => "KEY",
            Dimension::Pur => "PUR",
            Dimension::Ttl => "TTL",
            Dimension::Usr => "USR",
            Dimension::Obj => "OBJ",
            Dimension::Dec => "DEC",
            Dimension::Shr => "SHR",
            Dimension::Logs => "LOGS",
            Dimension::Features => "FEATURES",
        }
    }

    fn of(sel: &Selector) -> Dimension {
        match sel {
            Selector::Key(_) => Dimension::Key,
            Selector::Usr(_) => Dimension::Usr,
            Selector::Pur(_) => Dimension::Pur,
            Selector::ObjAbsent(_) => Dimension::Obj,
            Selector::DecAllowed => Dimension::Dec,
            Selector::Shr(_) => Dimension::Shr,
            Selector::ExpiredOnly => Dimension::Ttl,
        }
    }
}

pub fn is_valid_pair(family: Family, dim: Option<Dimension>) -> bool {
    match dim {
        None => family.dimensions().is_empty(),
        Some(d) => family.dimensions().contains(&d),
    }
}

/// Operation name as used on the wire and in the audit trail.
pub fn op_name(family: Family, dim: Option<Dimension>) -> String {
    match (family, dim) {
        (Family::GetSystem, Some(d)) => format!("GET-SYSTEM-{}", d.name()),
        (f, Some(d)) => format!("{}-BY-{}", f.name(), d.name()),
        (f, None) => f.name().to_string(),
    }
}

/// Inverse of [`op_name`] over every name, valid pair or not.
pub fn parse_op_name(name: &str) -> Option<(Family, Option<Dimension>)> {
    let families = Family::GRID.into_iter().chain([Family::VerifyDeletion]);
    for f in families {
        if name == f.name() {
            return Some((f, None));
        }
        for d in Dimension::ALL {
            if name == op_name(f, Some(d)) {
                return Some((f, Some(d)));
            }
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GdprQuery {
    CreateRecord(PersonalRecord),
    DeleteRecord(Selector),
    ReadData(Selector),
    ReadMetadata(Selector),
    UpdateData { key: String, data: String },
    UpdateMetadata { selector: Selector, edit: MetadataEdit },
    GetSystemLogs { start: u64, end: u64 },
    GetSystemFeatures,
    VerifyDeletion(String),
}

impl GdprQuery {
    pub fn kind(&self) -> (Family, Option<Dimension>) {
        match self {
            GdprQuery::CreateRecord(_) => (Family::CreateRecord, None),
            GdprQuery::DeleteRecord(s) => (Family::DeleteRecord, Some(Dimension::of(s))),
            GdprQuery::ReadData(s) => (Family::ReadData, Some(Dimension::of(s))),
            GdprQuery::ReadMetadata(s) => (Family::ReadMetadata, Some(Dimension::of(s))),
            GdprQuery::UpdateData { .. } => (Family::UpdateData, Some(Dimension::Key)),
            GdprQuery::UpdateMetadata { selector, .. } => (Family::UpdateMetadata, Some(Dimension::of(selector))),
            GdprQuery::GetSystemLogs { .. } => (Family::GetSystem, Some(Dimension::Logs)),
            GdprQuery::GetSystemFeatures => (Family::GetSystem, Some(Dimension::Features)),
            GdprQuery::VerifyDeletion(_) => (Family::VerifyDeletion, None),
        }
    }

    pub fn op_name(&self) -> String {
        let (f, d) = self.kind();
        op_name(f, d)
    }

    /// Rejects family/dimension pairs outside the grid and invalid tokens.
    pub fn validate(&self) -> Result<()> {
        let (f, d) = self.kind();
        if !is_valid_pair(f, d) {
            return Err(Error::Malformed(format!("{} is not a query", op_name(f, d))));
        }
        let token_ok = |t: &str| {
            if is_valid_token(t) {
                Ok(())
            } else {
                Err(Error::Malformed(format!("invalid token {t:?}")))
            }
        };
        match self {
            GdprQuery::CreateRecord(r) => r.validate().map_err(|e| Error::Malformed(e.to_string())),
            GdprQuery::DeleteRecord(s) | GdprQuery::ReadData(s) | GdprQuery::ReadMetadata(s) => {
                s.token().map_or(Ok(()), token_ok)
            }
            GdprQuery::UpdateMetadata { selector, .. } => selector.token().map_or(Ok(()), token_ok),
            GdprQuery::UpdateData { key, data } => token_ok(key).and_then(|()| token_ok(data)),
            GdprQuery::VerifyDeletion(k) => token_ok(k),
            GdprQuery::GetSystemLogs { .. } | GdprQuery::GetSystemFeatures => Ok(()),
        }
    }

    /// The key a by-key query targets.
    pub fn target_key(&self) -> Option<&str> {
        match self {
            GdprQuery::CreateRecord(r) => Some(&r.key),
            GdprQuery::DeleteRecord(Selector::Key(k))
            | GdprQuery::ReadData(Selector::Key(k))
            | GdprQuery::ReadMetadata(Selector::Key(k))
            | GdprQuery::UpdateMetadata { selector: Selector::Key(k), .. }
            | GdprQuery::UpdateData { key: k, .. }
            | GdprQuery::VerifyDeletion(k) => Some(k),
            _ => None,
        }
    }

    /// Predicate text recorded in the audit trail. Never includes data.
    pub fn selector_text(&self) -> String {
        match self {
            GdprQuery::CreateRecord(r) => format!("KEY={}", r.key),
            GdprQuery::DeleteRecord(s) | GdprQuery::ReadData(s) | GdprQuery::ReadMetadata(s) => s.to_string(),
            GdprQuery::UpdateData { key, .. } | GdprQuery::VerifyDeletion(key) => format!("KEY={key}"),
            GdprQuery::UpdateMetadata { selector, edit } => format!("{selector} {edit}"),
            GdprQuery::GetSystemLogs { start, end } => format!("RANGE={start}..{end}"),
            GdprQuery::GetSystemFeatures => "-".to_string(),
        }
    }

    /// Argument text following the op name on the wire.
    pub fn args_text(&self) -> String {
        match self {
            GdprQuery::CreateRecord(r) => r.to_line(),
            GdprQuery::DeleteRecord(s) | GdprQuery::ReadData(s) | GdprQuery::ReadMetadata(s) => {
                s.token().unwrap_or_default().to_string()
            }
            GdprQuery::UpdateData { key, data } => format!("{key} {data}"),
            GdprQuery::UpdateMetadata { selector, edit } => match selector.token() {
                Some(t) => format!("{t} {edit}"),
                None => edit.to_string(),
            },
            GdprQuery::GetSystemLogs { start, end } => format!("{start} {end}"),
            GdprQuery::GetSystemFeatures => String::new(),
            GdprQuery::VerifyDeletion(k) => k.clone(),
        }
    }

    /// Builds a query from an op name and its argument text.
    pub fn parse(op: &str, args: &str) -> Result<GdprQuery> {
        let (family, dim) = parse_op_name(op).ok_or_else(|| Error::Malformed(format!("unknown operation {op:?}")))?;
        if !is_valid_pair(family, dim) {
            return Err(Error::Malformed(format!("{op} is not a query")));
        }
        let words: Vec<&str> = args.split_whitespace().collect();
        let arity = |n: usize| {
            if words.len() == n {
                Ok(())
            } else {
                Err(Error::Malformed(format!("{op} takes {n} argument(s), got {}", words.len())))
            }
        };
        let selector = |dim: Option<Dimension>, words: &[&str]| -> Result<Selector> {
            let tok =
                || words.first().map(|w| w.to_string()).ok_or_else(|| Error::Malformed(format!("{op} needs a token")));
            Ok(match dim.expect("grid pair has a dimension") {
                Dimension::Key => Selector::Key(tok()?),
                Dimension::Usr => Selector::Usr(tok()?),
                Dimension::Pur => Selector::Pur(tok()?),
                Dimension::Obj => Selector::ObjAbsent(tok()?),
                Dimension::Shr => Selector::Shr(tok()?),
                Dimension::Dec => Selector::DecAllowed,
                Dimension::Ttl => Selector::ExpiredOnly,
                Dimension::Logs | Dimension::Features => unreachable!("not a selector dimension"),
            })
        };
        let takes_token = |d: Option<Dimension>| !matches!(d, Some(Dimension::Dec | Dimension::Ttl));
        let q = match family {
            Family::CreateRecord => {
                arity(1)?;
                GdprQuery::CreateRecord(parse_record(words[0]).map_err(|e| Error::Malformed(e.to_string()))?)
            }
            Family::DeleteRecord | Family::ReadData | Family::ReadMetadata => {
                arity(usize::from(takes_token(dim)))?;
                let s = selector(dim, &words)?;
                match family {
                    Family::DeleteRecord => GdprQuery::DeleteRecord(s),
                    Family::ReadData => GdprQuery::ReadData(s),
                    _ => GdprQuery::ReadMetadata(s),
                }
            }
            Family::UpdateData => {
                arity(2)?;
                GdprQuery::UpdateData { key: words[0].to_string(), data: words[1].to_string() }
            }
            Family::UpdateMetadata => {
                arity(3)?;
                let selector = selector(dim, &words)?;
                let edit = MetadataEdit::parse(words[1].parse::<EditOp>()?, words[2])?;
                GdprQuery::UpdateMetadata { selector, edit }
            }
            Family::GetSystem if dim == Some(Dimension::Logs) => {
                arity(2)?;
                let num = |w: &str| w.parse::<u64>().map_err(|_| Error::Malformed(format!("bad timestamp {w:?}")));
                GdprQuery::GetSystemLogs { start: num(words[0])?, end: num(words[1])? }
            }
            Family::GetSystem => {
                arity(0)?;
                GdprQuery::GetSystemFeatures
            }
            Family::VerifyDeletion => {
                arity(1)?;
                GdprQuery::VerifyDeletion(words[0].to_string())
            }
        };
        q.validate()?;
        Ok(q)
    }
}

impl fmt::Display for GdprQuery {
    /// `<OP> <args>`, the wire form without the role prefix.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args = self.args_text();
        if args.is_empty() {
            f.write_str(&self.op_name())
        } else {
            write!(f, "{} {}", self.op_name(), args)
        }
    }
}
