use std::fmt;
use std::str::FromStr;

use crate::store::{AtRestTransform, Persistence, StoreConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Capability {
    Ttl,
    Encryption,
    Auditing,
    MetadataIndexing,
    AccessControl,
}

impl Capability {
    pub const ALL: [Capability; 5] = [
        Capability::Ttl,
        Capability::Encryption,
        Capability::Auditing,
        Capability::MetadataIndexing,
        Capability::AccessControl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Capability::Ttl => "TTL",
            Capability::Encryption => "ENCRYPTION",
            Capability::Auditing => "AUDITING",
            Capability::MetadataIndexing => "METADATA_INDEXING",
            Capability::AccessControl => "ACCESS_CONTROL",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Support {
    Full,
    Partial,
    None,
}

impl Support {
    pub fn name(self) -> &'static str {
        match self {
            Support::Full => "FULL",
            Support::Partial => "PARTIAL",
            Support::None => "NONE",
        }
    }
}

impl FromStr for Support {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "FULL" => Ok(Support::Full),
            "PARTIAL" => Ok(Support::Partial),
            "NONE" => Ok(Support::None),
            other => Err(format!("unknown support level {other:?}")),
        }
    }
}

/// Support level for each of the five capabilities, in [`Capability::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FeatureReport([Support; 5]);

impl FeatureReport {
    pub fn new(levels: [Support; 5]) -> Self {
        FeatureReport(levels)
    }

    /// Derives the report from a live configuration.
    pub fn from_config(config: &StoreConfig) -> Self {
        let ttl = if config.strict_ttl() { Support::Full } else { Support::Partial };
        let encryption = match (&config.persistence, &config.at_rest_transform) {
            (Persistence::AppendLog { .. }, AtRestTransform::Encrypted { .. }) => Support::Full,
            _ => Support::None,
        };
        let auditing = if config.audit { Support::Full } else { Support::None };
        let indexing = match config.index_attributes {
            s if s.is_all() => Support::Full,
            s if s.is_empty() => Support::None,
            _ => Support::Partial,
        };
        FeatureReport([ttl, encryption, auditing, indexing, Support::Full])
    }

    pub fn get(&self, cap: Capability) -> Support {
        self.0[cap as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Capability, Support)> + '_ {
        Capability::ALL.into_iter().map(|c| (c, self.get(c)))
    }

    /// One `NAME=LEVEL` line per capability.
    pub fn to_lines(&self) -> Vec<String> {
        self.iter().map(|(c, s)| format!("{}={}", c.name(), s.name())).collect()
    }

    pub fn from_lines<S: AsRef<str>>(lines: &[S]) -> Result<Self, String> {
        let mut levels = [None; 5];
        for line in lines {
            let line = line.as_ref();
            let (name, level) = line.split_once('=').ok_or_else(|| format!("bad feature line {line:?}"))?;
            let cap = Capability::ALL
                .into_iter()
                .find(|c| c.name() == name)
                .ok_or_else(|| format!("unknown capability {name:?}"))?;
            levels[cap as usize] = Some(level.parse()?);
        }
        let mut out = [Support::None; 5];
        for (slot, level) in out.iter_mut().zip(levels) {
            *slot = level.ok_or("feature report is missing a capability")?;
        }
        Ok(FeatureReport(out))
    }
}

impl fmt::Display for FeatureReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_lines().join("\n"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{IndexSet, IndexedAttr};

    #[test]
    fn config_to_report_table() {
        let cases = [
            (StoreConfig::default(), [Support::Full, Support::None, Support::Full, Support::Full, Support::Full]),
            (
                StoreConfig { index_attributes: IndexSet::none().with(IndexedAttr::Usr), ..Default::default() },
                [Support::Full, Support::None, Support::Full, Support::Partial, Support::Full],
            ),
            (
                StoreConfig {
                    index_attributes: IndexSet::none(),
                    reap_interval_ms: 5_000,
                    audit: false,
                    persistence: Persistence::AppendLog { dir: None },
                    at_rest_transform: AtRestTransform::Encrypted { secret: None },
                    ..Default::default()
                },
                [Support::Partial, Support::Full, Support::None, Support::None, Support::Full],
            ),
        ];
        for (config, want) in cases {
            assert_eq!(FeatureReport::from_config(&config), FeatureReport::new(want));
        }
    }

    #[test]
    fn lines_round_trip() {
        let r = FeatureReport::from_config(&StoreConfig::default());
        assert_eq!(r.to_lines()[0], "TTL=FULL");
        assert_eq!(FeatureReport::from_lines(&r.to_lines()).unwrap(), r);
        assert!(FeatureReport::from_lines(&["TTL=FULL"]).is_err());
    }
}
