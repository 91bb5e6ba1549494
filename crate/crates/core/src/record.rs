//! Personal-data records and their text form.
//!
//! A record line is `<key>;<data>;` followed by seven `NAME=v1,v2,...;`
//! attributes. Every field is printable ASCII; `;` separates fields and `,`
//! separates values, so neither may appear inside a token. The canonical form
//! orders attributes `PUR,TTL,USR,OBJ,DEC,SHR,SRC`, keeps set values in the
//! order they were added, renders the empty set as nothing after `=`, and
//! ends with `;`.
//!
//! ```
//! use gdprkv::record::{parse_record, serialize_record};
//!
//! let line = "ph-1x4b;123-456-7890;PUR=ads,2fa;TTL=7776000;USR=neo;OBJ=;DEC=;SHR=;SRC=first-party;";
//! let rec = parse_record(line).unwrap();
//! assert_eq!(rec.meta.usr, "neo");
//! assert_eq!(serialize_record(&rec), line);
//! ```

use std::fmt;
use std::hash::{Hash, Hasher};

use thiserror::Error;

/// Value lists that parse to the empty set besides the empty string.
const EMPTY_SET_ALIASES: [&str; 2] = ["\u{2205}", "null"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordError {
    #[error("line has no key field")]
    MissingKey,
    #[error("line has no data field")]
    MissingData,
    #[error("empty token in {0}")]
    EmptyToken(&'static str),
    #[error("forbidden character {ch:?} in {field}")]
    ForbiddenChar { field: &'static str, ch: char },
    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),
    #[error("duplicate attribute {0}")]
    DuplicateAttribute(Attribute),
    #[error("missing attribute {0}")]
    MissingAttribute(Attribute),
    #[error("TTL is not a non-negative integer: {0:?}")]
    BadTtl(String),
    #[error("USR must hold exactly one token")]
    UsrCardinality,
}

/// The seven metadata attributes, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Attribute {
    Pur,
    Ttl,
    Usr,
    Obj,
    Dec,
    Shr,
    Src,
}

impl Attribute {
    pub const CANONICAL: [Attribute; 7] = [
        Attribute::Pur,
        Attribute::Ttl,
        Attribute::Usr,
        Attribute::Obj,
        Attribute::Dec,
        Attribute::Shr,
        Attribute::Src,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Attribute::Pur => "PUR",
            Attribute::Ttl => "TTL",
            Attribute::Usr => "USR",
            Attribute::Obj => "OBJ",
            Attribute::Dec => "DEC",
            Attribute::Shr => "SHR",
            Attribute::Src => "SRC",
        }
    }

    pub fn parse(name: &str) -> Option<Attribute> {
        Attribute::CANONICAL.into_iter().find(|a| a.name() == name)
    }

    /// Set-valued attributes (everything except TTL and USR).
    pub fn is_set(self) -> bool {
        !matches!(self, Attribute::Ttl | Attribute::Usr)
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Checks one token: non-empty, printable ASCII, no `;` or `,`.
pub fn validate_token(token: &str, field: &'static str) -> Result<(), RecordError> {
    if token.is_empty() {
        return Err(RecordError::EmptyToken(field));
    }
    match token.chars().find(|&c| !is_token_char(c)) {
        Some(ch) => Err(RecordError::ForbiddenChar { field, ch }),
        None => Ok(()),
    }
}

pub fn is_valid_token(token: &str) -> bool {
    !token.is_empty() && token.chars().all(is_token_char)
}

fn is_token_char(c: char) -> bool {
    c.is_ascii_graphic() && c != ';' && c != ','
}

/// Values of a multi-valued attribute. Keeps the order values were first
/// given in, so a parsed line serializes back exactly; equality and hashing
/// ignore that order.
#[derive(Clone, Default)]
pub struct ValueSet(Vec<String>);

impl ValueSet {
    pub fn new() -> Self {
        ValueSet(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: &str) -> bool {
        self.0.iter().any(|x| x == v)
    }

    /// Appends `v` unless present; returns whether it was added.
    pub fn insert(&mut self, v: String) -> bool {
        if self.contains(&v) {
            return false;
        }
        self.0.push(v);
        true
    }

    pub fn remove(&mut self, v: &str) -> bool {
        let before = self.0.len();
        self.0.retain(|x| x != v);
        self.0.len() != before
    }

    pub fn retain(&mut self, f: impl FnMut(&String) -> bool) {
        self.0.retain(f);
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.0.iter()
    }

    pub fn first(&self) -> Option<&String> {
        self.0.first()
    }
}

impl PartialEq for ValueSet {
    fn eq(&self, other: &Self) -> bool {
        self.len() == other.len() && self.iter().all(|v| other.contains(v))
    }
}

impl Eq for ValueSet {}

impl Hash for ValueSet {
    fn hash<H: Hasher>(&self, state: &mut H) {
        let mut sorted: Vec<&String> = self.0.iter().collect();
        sorted.sort();
        sorted.hash(state);
    }
}

impl fmt::Debug for ValueSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(&self.0).finish()
    }
}

impl Extend<String> for ValueSet {
    fn extend<I: IntoIterator<Item = String>>(&mut self, iter: I) {
        for v in iter {
            self.insert(v);
        }
    }
}

impl FromIterator<String> for ValueSet {
    fn from_iter<I: IntoIterator<Item = String>>(iter: I) -> Self {
        let mut set = ValueSet::new();
        set.extend(iter);
        set
    }
}

impl<const N: usize> From<[String; N]> for ValueSet {
    fn from(values: [String; N]) -> Self {
        values.into_iter().collect()
    }
}

impl<'a> IntoIterator for &'a ValueSet {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// GDPR metadata carried by every record.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Metadata {
    pub pur: ValueSet,
    /// Allowed lifetime in seconds, counted from creation.
    pub ttl: u64,
    pub usr: String,
    pub obj: ValueSet,
    pub dec: ValueSet,
    pub shr: ValueSet,
    pub src: ValueSet,
}

impl Metadata {
    pub fn set(&self, attr: Attribute) -> Option<&ValueSet> {
        match attr {
            Attribute::Pur => Some(&self.pur),
            Attribute::Obj => Some(&self.obj),
            Attribute::Dec => Some(&self.dec),
            Attribute::Shr => Some(&self.shr),
            Attribute::Src => Some(&self.src),
            Attribute::Ttl | Attribute::Usr => None,
        }
    }

    pub fn set_mut(&mut self, attr: Attribute) -> Option<&mut ValueSet> {
        match attr {
            Attribute::Pur => Some(&mut self.pur),
            Attribute::Obj => Some(&mut self.obj),
            Attribute::Dec => Some(&mut self.dec),
            Attribute::Shr => Some(&mut self.shr),
            Attribute::Src => Some(&mut self.src),
            Attribute::Ttl | Attribute::Usr => None,
        }
    }

    /// Bytes of attribute values: every token plus the decimal TTL.
    pub fn value_bytes(&self) -> usize {
        let sets: usize = [&self.pur, &self.obj, &self.dec, &self.shr, &self.src]
            .iter()
            .flat_map(|s| s.iter())
            .map(String::len)
            .sum();
        sets + self.usr.len() + decimal_len(self.ttl)
    }

    pub fn validate(&self) -> Result<(), RecordError> {
        validate_token(&self.usr, "USR")?;
        for attr in Attribute::CANONICAL {
            if let Some(set) = self.set(attr) {
                for t in set {
                    validate_token(t, attr.name())?;
                }
            }
        }
        Ok(())
    }

    fn write_attributes(&self, out: &mut String) {
        for attr in Attribute::CANONICAL {
            out.push_str(attr.name());
            out.push('=');
            match attr {
                Attribute::Ttl => out.push_str(&self.ttl.to_string()),
                Attribute::Usr => out.push_str(&self.usr),
                _ => {
                    let set = self.set(attr).expect("set attribute");
                    let mut first = true;
                    for v in set {
                        if !first {
                            out.push(',');
                        }
                        out.push_str(v);
                        first = false;
                    }
                }
            }
            out.push(';');
        }
    }
}

fn decimal_len(mut n: u64) -> usize {
    let mut len = 1;
    while n >= 10 {
        n /= 10;
        len += 1;
    }
    len
}

/// A personal-data record. `created_at` is assigned by the store and is not
/// part of the text form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PersonalRecord {
    pub key: String,
    pub data: String,
    pub meta: Metadata,
    pub created_at: u64,
}

impl PersonalRecord {
    pub fn new(key: impl Into<String>, data: impl Into<String>, meta: Metadata) -> Self {
        PersonalRecord { key: key.into(), data: data.into(), meta, created_at: 0 }
    }

    /// Instant (ms) at which the record stops being visible.
    pub fn expiry_ms(&self) -> u64 {
        self.created_at.saturating_add(self.meta.ttl.saturating_mul(1000))
    }

    /// Expiry is inclusive: a record expiring exactly at `now` is expired.
    pub fn is_expired(&self, now_ms: u64) -> bool {
        self.expiry_ms() <= now_ms
    }

    pub fn validate(&self) -> Result<(), RecordError> {
        validate_token(&self.key, "key")?;
        validate_token(&self.data, "data")?;
        self.meta.validate()
    }

    pub fn to_line(&self) -> String {
        serialize_record(self)
    }
}

impl fmt::Display for PersonalRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_record(self))
    }
}

/// Canonical text form of a full record.
pub fn serialize_record(r: &PersonalRecord) -> String {
    let mut out = String::with_capacity(r.key.len() + r.data.len() + 64);
    out.push_str(&r.key);
    out.push(';');
    out.push_str(&r.data);
    out.push(';');
    r.meta.write_attributes(&mut out);
    out
}

/// Canonical metadata-only line: the key followed by the seven attributes,
/// with the data field omitted.
pub fn serialize_metadata(key: &str, meta: &Metadata) -> String {
    let mut out = String::with_capacity(key.len() + 64);
    out.push_str(key);
    out.push(';');
    meta.write_attributes(&mut out);
    out
}

/// Parses a record line. The returned record has `created_at = 0`.
pub fn parse_record(line: &str) -> Result<PersonalRecord, RecordError> {
    let mut fields = split_fields(line);
    let key = fields.next().filter(|k| !k.is_empty()).ok_or(RecordError::MissingKey)?;
    validate_token(key, "key")?;
    let data = fields.next().ok_or(RecordError::MissingData)?;
    if data.is_empty() || data.contains('=') && Attribute::parse(data.split('=').next().unwrap_or("")).is_some() {
        return Err(RecordError::MissingData);
    }
    validate_token(data, "data")?;
    let meta = parse_attributes(fields)?;
    Ok(PersonalRecord { key: key.to_string(), data: data.to_string(), meta, created_at: 0 })
}

/// Parses a metadata-only line as produced by [`serialize_metadata`].
pub fn parse_metadata_line(line: &str) -> Result<(String, Metadata), RecordError> {
    let mut fields = split_fields(line);
    let key = fields.next().filter(|k| !k.is_empty()).ok_or(RecordError::MissingKey)?;
    validate_token(key, "key")?;
    let meta = parse_attributes(fields)?;
    Ok((key.to_string(), meta))
}

fn split_fields(line: &str) -> std::str::Split<'_, char> {
    let line = line.trim_end_matches(['\n', '\r']);
    let line = line.strip_suffix(';').unwrap_or(line);
    line.split(';')
}

fn parse_attributes<'a>(fields: impl Iterator<Item = &'a str>) -> Result<Metadata, RecordError> {
    let mut seen = [false; 7];
    let mut meta = Metadata::default();
    for field in fields {
        let (name, values) = field.split_once('=').ok_or_else(|| RecordError::UnknownAttribute(field.to_string()))?;
        let attr = Attribute::parse(name).ok_or_else(|| RecordError::UnknownAttribute(name.to_string()))?;
        let slot = Attribute::CANONICAL.iter().position(|a| *a == attr).expect("canonical");
        if std::mem::replace(&mut seen[slot], true) {
            return Err(RecordError::DuplicateAttribute(attr));
        }
        match attr {
            Attribute::Ttl => {
                if values.is_empty() || !values.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(RecordError::BadTtl(values.to_string()));
                }
                meta.ttl = values.parse().map_err(|_| RecordError::BadTtl(values.to_string()))?;
            }
            Attribute::Usr => {
                if values.is_empty() || values.contains(',') || EMPTY_SET_ALIASES.contains(&values) {
                    return Err(RecordError::UsrCardinality);
                }
                validate_token(values, "USR")?;
                meta.usr = values.to_string();
            }
            _ => {
                let set = meta.set_mut(attr).expect("set attribute");
                *set = parse_value_list(values, attr.name())?;
            }
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(RecordError::MissingAttribute(Attribute::CANONICAL[missing]));
    }
    Ok(meta)
}

/// Parses `v1,v2,...` into a set; the empty string and the empty-set aliases
/// produce the empty set.
pub fn parse_value_list(values: &str, field: &'static str) -> Result<ValueSet, RecordError> {
    if values.is_empty() || EMPTY_SET_ALIASES.contains(&values) {
        return Ok(ValueSet::new());
    }
    values.split(',').map(|t| validate_token(t, field).map(|()| t.to_string())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = "ph-1x4b;123-456-7890;PUR=ads,2fa;TTL=7776000;USR=neo;OBJ=;DEC=;SHR=;SRC=first-party;";

    fn set(items: &[&str]) -> ValueSet {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parses_reference_example() {
        let r = parse_record(EXAMPLE).unwrap();
        assert_eq!(r.key, "ph-1x4b");
        assert_eq!(r.data, "123-456-7890");
        assert_eq!(r.meta.pur, set(&["ads", "2fa"]));
        assert_eq!(r.meta.ttl, 7_776_000);
        assert_eq!(r.meta.usr, "neo");
        assert!(r.meta.obj.is_empty() && r.meta.dec.is_empty() && r.meta.shr.is_empty());
        assert_eq!(r.meta.src, set(&["first-party"]));
    }

    #[test]
    fn empty_set_aliases_are_accepted_but_never_emitted() {
        let typographic = EXAMPLE.replace("OBJ=;DEC=;SHR=;", "OBJ=\u{2205};DEC=null;SHR=;");
        let r = parse_record(&typographic).unwrap();
        assert!(r.meta.obj.is_empty() && r.meta.dec.is_empty());
        assert!(!serialize_record(&r).contains("null"));
        assert!(serialize_record(&r).is_ascii());
    }

    #[test]
    fn all_empty_sets_render_as_empty_lists() {
        let meta = Metadata { ttl: 5, usr: "u".into(), ..Default::default() };
        let r = PersonalRecord::new("k", "d", meta);
        assert_eq!(serialize_record(&r), "k;d;PUR=;TTL=5;USR=u;OBJ=;DEC=;SHR=;SRC=;");
    }

    #[test]
    fn multi_valued_sets() {
        let r = parse_record("k1;d1;PUR=a;TTL=0;USR=u;OBJ=a,b;DEC=x;SHR=p1,p2;SRC=s;").unwrap();
        assert_eq!(r.meta.obj, set(&["a", "b"]));
        assert_eq!(r.meta.shr, set(&["p1", "p2"]));
        assert_eq!(r.meta.dec, set(&["x"]));
        assert_eq!(r.meta.ttl, 0);
    }

    #[test]
    fn attribute_order_is_free_on_input() {
        let shuffled = "k;d;SRC=s;USR=u;TTL=3;PUR=b,a;SHR=;DEC=;OBJ=;";
        let r = parse_record(shuffled).unwrap();
        assert_eq!(serialize_record(&r), "k;d;PUR=b,a;TTL=3;USR=u;OBJ=;DEC=;SHR=;SRC=s;");
        assert_eq!(r.meta.pur, set(&["a", "b"]));
    }

    #[test]
    fn rejects_malformed_lines() {
        let cases: &[(&str, RecordError)] = &[
            ("", RecordError::MissingKey),
            ("k", RecordError::MissingData),
            ("k;;PUR=;TTL=1;USR=u;OBJ=;DEC=;SHR=;SRC=;", RecordError::MissingData),
            ("k;d;PUR=;TTL=1;USR=u;OBJ=;DEC=;SHR=;SRC=;XYZ=1;", RecordError::UnknownAttribute("XYZ".into())),
            ("k;d;PUR=;PUR=a;TTL=1;USR=u;OBJ=;DEC=;SHR=;SRC=;", RecordError::DuplicateAttribute(Attribute::Pur)),
            ("k;d;PUR=;TTL=1h;USR=u;OBJ=;DEC=;SHR=;SRC=;", RecordError::BadTtl("1h".into())),
            ("k;d;PUR=;TTL=-1;USR=u;OBJ=;DEC=;SHR=;SRC=;", RecordError::BadTtl("-1".into())),
            ("k;d;PUR=;TTL=1;USR=u,v;OBJ=;DEC=;SHR=;SRC=;", RecordError::UsrCardinality),
            ("k;d;PUR=;TTL=1;USR=;OBJ=;DEC=;SHR=;SRC=;", RecordError::UsrCardinality),
            ("k;d;PUR=;TTL=1;USR=u;OBJ=;DEC=;SHR=;", RecordError::MissingAttribute(Attribute::Src)),
            ("k;d;PUR=a,,b;TTL=1;USR=u;OBJ=;DEC=;SHR=;SRC=;", RecordError::EmptyToken("PUR")),
            ("k y;d;PUR=;TTL=1;USR=u;OBJ=;DEC=;SHR=;SRC=;", RecordError::ForbiddenChar { field: "key", ch: ' ' }),
            (
                "k;d\u{e9};PUR=;TTL=1;USR=u;OBJ=;DEC=;SHR=;SRC=;",
                RecordError::ForbiddenChar { field: "data", ch: '\u{e9}' },
            ),
        ];
        for (line, want) in cases {
            assert_eq!(parse_record(line).unwrap_err(), *want, "line {line:?}");
        }
    }

    #[test]
    fn separators_inside_tokens_are_never_truncated() {
        let meta = Metadata { ttl: 1, usr: "u".into(), pur: set(&["a,b"]), ..Default::default() };
        assert!(meta.validate().is_err());
        assert!(validate_token("a;b", "x").is_err());
    }

    #[test]
    fn metadata_line_omits_data() {
        let r = parse_record(EXAMPLE).unwrap();
        let line = serialize_metadata(&r.key, &r.meta);
        assert!(!line.contains("123-456-7890"));
        assert_eq!(parse_metadata_line(&line).unwrap(), (r.key.clone(), r.meta.clone()));
    }

    #[test]
    fn expiry_is_inclusive() {
        let mut r = parse_record(EXAMPLE).unwrap();
        r.created_at = 1_000;
        r.meta.ttl = 2;
        assert_eq!(r.expiry_ms(), 3_000);
        assert!(!r.is_expired(2_999));
        assert!(r.is_expired(3_000));
    }

    #[test]
    fn value_bytes_counts_tokens_and_ttl_digits() {
        let r = parse_record(EXAMPLE).unwrap();
        // ads + 2fa + 7776000 + neo + first-party
        assert_eq!(r.meta.value_bytes(), 3 + 3 + 7 + 3 + 11);
    }
}
