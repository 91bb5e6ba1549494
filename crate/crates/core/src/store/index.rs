use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::record::{Attribute, Metadata, ValueSet};

/// A metadata attribute the store can keep a secondary index for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IndexedAttr {
    Usr,
    Pur,
    Obj,
    Dec,
    Shr,
    /// Expiry-ordered index, used by the reaper and `DELETE-RECORD-BY-TTL`.
    Expiry,
}

impl IndexedAttr {
    pub const ALL: [IndexedAttr; 6] =
        [IndexedAttr::Usr, IndexedAttr::Pur, IndexedAttr::Obj, IndexedAttr::Dec, IndexedAttr::Shr, IndexedAttr::Expiry];

    pub(crate) const TOKEN: [IndexedAttr; 5] =
        [IndexedAttr::Usr, IndexedAttr::Pur, IndexedAttr::Obj, IndexedAttr::Dec, IndexedAttr::Shr];

    pub fn name(self) -> &'static str {
        match self {
            IndexedAttr::Usr => "usr",
            IndexedAttr::Pur => "pur",
            IndexedAttr::Obj => "obj",
            IndexedAttr::Dec => "dec",
            IndexedAttr::Shr => "shr",
            IndexedAttr::Expiry => "ttl",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }

    pub fn attribute(self) -> Option<Attribute> {
        match self {
            IndexedAttr::Usr => Some(Attribute::Usr),
            IndexedAttr::Pur => Some(Attribute::Pur),
            IndexedAttr::Obj => Some(Attribute::Obj),
            IndexedAttr::Dec => Some(Attribute::Dec),
            IndexedAttr::Shr => Some(Attribute::Shr),
            IndexedAttr::Expiry => None,
        }
    }
}

impl FromStr for IndexedAttr {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        IndexedAttr::ALL
            .into_iter()
            .find(|a| a.name() == lower || (lower == "expiry" && *a == IndexedAttr::Expiry))
            .ok_or_else(|| format!("unknown index attribute {s:?}"))
    }
}

/// Which secondary indices a store maintains.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct IndexSet(u8);

impl IndexSet {
    pub fn none() -> Self {
        IndexSet(0)
    }

    pub fn all() -> Self {
        IndexedAttr::ALL.into_iter().collect()
    }

    pub fn with(mut self, attr: IndexedAttr) -> Self {
        self.0 |= attr.bit();
        self
    }

    pub fn contains(self, attr: IndexedAttr) -> bool {
        self.0 & attr.bit() != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_all(self) -> bool {
        self == IndexSet::all()
    }

    pub fn iter(self) -> impl Iterator<Item = IndexedAttr> {
        IndexedAttr::ALL.into_iter().filter(move |a| self.contains(*a))
    }
}

impl FromIterator<IndexedAttr> for IndexSet {
    fn from_iter<I: IntoIterator<Item = IndexedAttr>>(iter: I) -> Self {
        iter.into_iter().fold(IndexSet::none(), IndexSet::with)
    }
}

impl FromStr for IndexSet {
    type Err = String;

    /// `all`, `none`, or a comma list such as `usr,pur,ttl`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "all" => Ok(IndexSet::all()),
            "none" | "" => Ok(IndexSet::none()),
            list => list.split(',').map(str::parse).collect(),
        }
    }
}

impl fmt::Debug for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(IndexedAttr::name)).finish()
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("none");
        }
        let names: Vec<_> = self.iter().map(IndexedAttr::name).collect();
        f.write_str(&names.join(","))
    }
}

/// Inverted index from attribute token to record keys. Records whose
/// attribute is empty sit in a dedicated bucket so every record has at least
/// one entry, as a row-level index would.
#[derive(Debug, Default)]
pub(crate) struct TokenIndex {
    postings: HashMap<String, HashSet<Arc<str>>>,
    empty: HashSet<Arc<str>>,
}

pub(crate) fn tokens_of(attr: IndexedAttr, meta: &Metadata) -> Vec<&str> {
    match attr {
        IndexedAttr::Usr => vec![meta.usr.as_str()],
        IndexedAttr::Expiry => Vec::new(),
        other => {
            let set: &ValueSet = meta.set(other.attribute().expect("token attr")).expect("set attr");
            set.iter().map(String::as_str).collect()
        }
    }
}

impl TokenIndex {
    pub fn insert(&mut self, key: &Arc<str>, tokens: &[&str]) {
        if tokens.is_empty() {
            self.empty.insert(key.clone());
            return;
        }
        for t in tokens {
            self.postings.entry((*t).to_string()).or_default().insert(key.clone());
        }
    }

    pub fn remove(&mut self, key: &str, tokens: &[&str]) {
        if tokens.is_empty() {
            self.empty.remove(key);
            return;
        }
        for t in tokens {
            if let Some(keys) = self.postings.get_mut(*t) {
                keys.remove(key);
                if keys.is_empty() {
                    self.postings.remove(*t);
                }
            }
        }
    }

    pub fn get(&self, token: &str) -> impl Iterator<Item = &Arc<str>> {
        self.postings.get(token).into_iter().flatten()
    }

    /// Logical footprint: each distinct token once plus one key per entry.
    pub fn bytes(&self) -> u64 {
        let postings: u64 = self
            .postings
            .iter()
            .map(|(t, keys)| t.len() as u64 + keys.iter().map(|k| k.len() as u64).sum::<u64>())
            .sum();
        postings + self.empty.iter().map(|k| k.len() as u64).sum::<u64>()
    }

    pub fn entries(&self) -> impl Iterator<Item = (Option<&str>, &Arc<str>)> {
        self.postings
            .iter()
            .flat_map(|(t, keys)| keys.iter().map(move |k| (Some(t.as_str()), k)))
            .chain(self.empty.iter().map(|k| (None, k)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_set_parsing() {
        assert_eq!("all".parse::<IndexSet>().unwrap(), IndexSet::all());
        assert_eq!("none".parse::<IndexSet>().unwrap(), IndexSet::none());
        let s: IndexSet = "usr,ttl".parse().unwrap();
        assert!(s.contains(IndexedAttr::Usr) && s.contains(IndexedAttr::Expiry));
        assert_eq!(s.len(), 2);
        assert_eq!(s.to_string(), "usr,ttl");
        assert!("usr,bogus".parse::<IndexSet>().is_err());
    }

    #[test]
    fn token_index_bookkeeping() {
        let mut idx = TokenIndex::default();
        let k: Arc<str> = Arc::from("k1");
        idx.insert(&k, &["a", "b"]);
        assert_eq!(idx.get("a").count(), 1);
        assert_eq!(idx.bytes(), (1 + 2) + (1 + 2));
        idx.remove("k1", &["a", "b"]);
        assert_eq!(idx.get("a").count(), 0);
        assert_eq!(idx.bytes(), 0);
        idx.insert(&k, &[]);
        assert_eq!(idx.bytes(), 2);
    }
}
