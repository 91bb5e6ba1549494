use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use super::load::LoadSpec;
use super::spec::{Template, WorkloadName, WorkloadSpec};
use super::zipf::DistributionKind;

/// Keys understood by the harness. `weight.<template>` is also accepted.
pub const KNOWN_KEYS: &[&str] = &[
    "recordcount",
    "operationcount",
    "workload",
    "distribution",
    "zipf_theta",
    "seed",
    "usercount",
    "activeusers",
    "purposecount",
    "partnercount",
    "keylength",
    "fieldlength",
    "metadatalength",
    "ttl_short_s",
    "ttl_long_s",
    "ttl_short_share",
    "threads",
    "validation",
    "clock",
    "tick_ms",
    "reap_interval_ms",
    "indices",
    "audit",
    "abort_below",
    "misuse_share",
];

/// `key=value` property set. Later assignments win, so command-line
/// overrides are applied with [`Properties::set`] after the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Properties {
    values: BTreeMap<String, String>,
}

impl Properties {
    pub fn new() -> Self {
        Properties::default()
    }

    /// Parses property text. `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut p = Properties::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            p.assign(line).map_err(|e| format!("line {}: {e}", n + 1))?;
        }
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Properties::parse(&text)
    }

    /// Applies one `key=value` assignment.
    pub fn assign(&mut self, assignment: &str) -> Result<(), String> {
        let (k, v) = assignment.split_once('=').ok_or_else(|| format!("expected key=value, got {assignment:?}"))?;
        self.set(k.trim(), v.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let known =
            KNOWN_KEYS.contains(&key) || key.strip_prefix("weight.").is_some_and(|t| t.parse::<Template>().is_ok());
        if !known {
            return Err(format!("unknown property {key:?}"));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, String>
    where
        T::Err: Display,
    {
        self.raw(key).map(|v| v.parse().map_err(|e| format!("bad value for {key}: {e}"))).transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, String>
    where
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn load_spec(&self) -> Result<LoadSpec, String> {
        let records = self.get_or("recordcount", 100_000usize)?;
        let base = LoadSpec::with_records(records);
        let spec = LoadSpec {
            users: self.get_or("usercount", base.users)?,
            purposes: self.get_or("purposecount", base.purposes)?,
            partners: self.get_or("partnercount", base.partners)?,
            key_len: self.get_or("keylength", base.key_len)?,
            data_len: self.get_or("fieldlength", base.data_len)?,
            metadata_len: self.get_or("metadatalength", base.metadata_len)?,
            ttl_short_s: self.get_or("ttl_short_s", base.ttl_short_s)?,
            ttl_long_s: self.get_or("ttl_long_s", base.ttl_long_s)?,
            ttl_short_share: self.get_or("ttl_short_share", base.ttl_short_share)?,
            seed: self.get_or("seed", 0u64)?,
            partitions: self.get_or("threads", 1usize)?,
            ..base
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Workloads selected by `workload` (a name, a comma list or `all`),
    /// each with the shared overrides applied.
    pub fn workload_specs(&self) -> Result<Vec<WorkloadSpec>, String> {
        let names: Vec<WorkloadName> = match self.raw("workload").unwrap_or("all") {
            "all" => WorkloadName::ALL.to_vec(),
            "" | "none" => Vec::new(),
            list => list.split(',').map(str::parse).collect::<Result<_, _>>()?,
        };
        let theta: Option<f64> = self.get("zipf_theta")?;
        let dist: Option<DistributionKind> = self.get("distribution")?;
        let ops: Option<usize> = self.get("operationcount")?;
        let mut specs = Vec::new();
        for name in names {
            let mut spec = WorkloadSpec::new(name);
            if let Some(d) = dist {
                spec.distribution = d;
            }
            if let (Some(t), DistributionKind::Zipf { .. }) = (theta, spec.distribution) {
                spec.distribution = DistributionKind::Zipf { theta: t };
            }
            if let Some(n) = ops {
                spec.operation_count = n;
            }
            for (k, v) in self.iter() {
                let Some(t) = k.strip_prefix("weight.") else { continue };
                let t: Template = t.parse()?;
                if t.workload() == name {
                    spec.set_weight(t, v.parse().map_err(|e| format!("bad value for {k}: {e}"))?)?;
                }
            }
            spec.validate()?;
            specs.push(spec);
        }
        Ok(specs)
    }
}
