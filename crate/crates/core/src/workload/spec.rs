use std::fmt;
use std::str::FromStr;

use super::zipf::DistributionKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WorkloadName {
    Controller,
    Customer,
    Processor,
    Regulator,
}

impl WorkloadName {
    pub const ALL: [WorkloadName; 4] =
        [WorkloadName::Controller, WorkloadName::Customer, WorkloadName::Processor, WorkloadName::Regulator];

    pub fn name(self) -> &'static str {
        match self {
            WorkloadName::Controller => "controller",
            WorkloadName::Customer => "customer",
            WorkloadName::Processor => "processor",
            WorkloadName::Regulator => "regulator",
        }
    }

    pub fn templates(self) -> impl Iterator<Item = Template> {
        Template::ALL.into_iter().filter(move |t| t.workload() == self)
    }
}

impl fmt::Display for WorkloadName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WorkloadName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        WorkloadName::ALL
            .into_iter()
            .find(|w| w.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown workload {s:?}"))
    }
}

/// A query shape a workload draws from. Each belongs to exactly one workload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Template {
    CreateRecord,
    DeleteByPur,
    DeleteByTtl,
    DeleteByUsr,
    UpdateMetadataByPur,
    UpdateMetadataByUsr,
    UpdateMetadataByShr,
    ReadDataByUsr,
    ReadMetadataByKey,
    UpdateDataByKey,
    UpdateMetadataByKey,
    DeleteByKey,
    ReadDataByKey,
    ReadDataByPur,
    ReadDataByObj,
    ReadDataByDec,
    ReadMetadataByUsr,
    GetSystemLogs,
    VerifyDeletion,
}

impl Template {
    pub const ALL: [Template; 19] = [
        Template::CreateRecord,
        Template::DeleteByPur,
        Template::DeleteByTtl,
        Template::DeleteByUsr,
        Template::UpdateMetadataByPur,
        Template::UpdateMetadataByUsr,
        Template::UpdateMetadataByShr,
        Template::ReadDataByUsr,
        Template::ReadMetadataByKey,
        Template::UpdateDataByKey,
        Template::UpdateMetadataByKey,
        Template::DeleteByKey,
        Template::ReadDataByKey,
        Template::ReadDataByPur,
        Template::ReadDataByObj,
        Template::ReadDataByDec,
        Template::ReadMetadataByUsr,
        Template::GetSystemLogs,
        Template::VerifyDeletion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Template::CreateRecord => "create-record",
            Template::DeleteByPur => "delete-record-by-pur",
            Template::DeleteByTtl => "delete-record-by-ttl",
            Template::DeleteByUsr => "delete-record-by-usr",
            Template::UpdateMetadataByPur => "update-metadata-by-pur",
            Template::UpdateMetadataByUsr => "update-metadata-by-usr",
            Template::UpdateMetadataByShr => "update-metadata-by-shr",
            Template::ReadDataByUsr => "read-data-by-usr",
            Template::ReadMetadataByKey => "read-metadata-by-key",
            Template::UpdateDataByKey => "update-data-by-key",
            Template::UpdateMetadataByKey => "update-metadata-by-key",
            Template::DeleteByKey => "delete-record-by-key",
            Template::ReadDataByKey => "read-data-by-key",
            Template::ReadDataByPur => "read-data-by-pur",
            Template::ReadDataByObj => "read-data-by-obj",
            Template::ReadDataByDec => "read-data-by-dec",
            Template::ReadMetadataByUsr => "read-metadata-by-usr",
            Template::GetSystemLogs => "get-system-logs",
            Template::VerifyDeletion => "verify-deletion",
        }
    }

    pub fn workload(self) -> WorkloadName {
        use Template::*;
        match self {
            CreateRecord | DeleteByPur | DeleteByTtl | DeleteByUsr | UpdateMetadataByPur | UpdateMetadataByUsr
            | UpdateMetadataByShr => WorkloadName::Controller,
            ReadDataByUsr | ReadMetadataByKey | UpdateDataByKey | UpdateMetadataByKey | DeleteByKey => {
                WorkloadName::Customer
            }
            ReadDataByKey | ReadDataByPur | ReadDataByObj | ReadDataByDec => WorkloadName::Processor,
            ReadMetadataByUsr | GetSystemLogs | VerifyDeletion => WorkloadName::Regulator,
        }
    }

    pub fn is_delete(self) -> bool {
        matches!(self, Template::DeleteByPur | Template::DeleteByTtl | Template::DeleteByUsr)
    }

    /// Default weight in percent within its workload.
    pub fn default_weight(self) -> f64 {
        use Template::*;
        match self {
            CreateRecord => 25.0,
            DeleteByPur | DeleteByTtl | DeleteByUsr => 25.0 / 3.0,
            UpdateMetadataByPur | UpdateMetadataByUsr | UpdateMetadataByShr => 50.0 / 3.0,
            ReadDataByUsr | ReadMetadataByKey | UpdateDataByKey | UpdateMetadataByKey | DeleteByKey => 20.0,
            ReadDataByKey => 80.0,
            ReadDataByPur | ReadDataByObj | ReadDataByDec => 20.0 / 3.0,
            ReadMetadataByUsr => 46.0,
            GetSystemLogs => 31.0,
            VerifyDeletion => 23.0,
        }
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Template {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Template::ALL.into_iter().find(|t| t.name() == s.trim()).ok_or_else(|| format!("unknown template {s:?}"))
    }
}

/// A named operation mix.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadSpec {
    pub name: WorkloadName,
    /// Template weights in percent; they sum to 100.
    pub weights: Vec<(Template, f64)>,
    /// How records or users are picked for the workload's primary templates.
    pub distribution: DistributionKind,
    pub operation_count: usize,
}

pub const DEFAULT_OPERATION_COUNT: usize = 10_000;

impl WorkloadSpec {
    pub fn new(name: WorkloadName) -> Self {
        let distribution = match name {
            WorkloadName::Controller => DistributionKind::Uniform,
            _ => DistributionKind::zipf(),
        };
        WorkloadSpec {
            name,
            weights: name.templates().map(|t| (t, t.default_weight())).collect(),
            distribution,
            operation_count: DEFAULT_OPERATION_COUNT,
        }
    }

    /// A mix that only ever draws `template`.
    pub fn single(template: Template) -> Self {
        let mut spec = WorkloadSpec::new(template.workload());
        for (t, w) in spec.weights.iter_mut() {
            *w = if *t == template { 100.0 } else { 0.0 };
        }
        spec
    }

    pub fn with_operations(mut self, n: usize) -> Self {
        self.operation_count = n;
        self
    }

    pub fn set_weight(&mut self, template: Template, weight: f64) -> Result<(), String> {
        match self.weights.iter_mut().find(|(t, _)| *t == template) {
            Some((_, w)) => {
                *w = weight;
                Ok(())
            }
            None => Err(format!("{template} is not part of the {} workload", self.name)),
        }
    }

    pub fn weight(&self, template: Template) -> f64 {
        self.weights.iter().find(|(t, _)| *t == template).map_or(0.0, |(_, w)| *w)
    }

    pub fn validate(&self) -> Result<(), String> {
        if let Some((t, _)) = self.weights.iter().find(|(t, _)| t.workload() != self.name) {
            return Err(format!("{t} is not part of the {} workload", self.name));
        }
        if let Some((t, w)) = self.weights.iter().find(|(_, w)| !(*w >= 0.0 && w.is_finite())) {
            return Err(format!("weight of {t} is invalid: {w}"));
        }
        let total: f64 = self.weights.iter().map(|(_, w)| w).sum();
        if (total - 100.0).abs() > 1e-6 {
            return Err(format!("{} weights sum to {total}, not 100", self.name));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_mixes_are_valid() {
        for w in WorkloadName::ALL {
            let spec = WorkloadSpec::new(w);
            spec.validate().unwrap();
            assert!(spec.weights.iter().all(|(t, _)| t.workload() == w));
        }
        assert_eq!(WorkloadSpec::new(WorkloadName::Customer).weights.len(), 5);
        assert_eq!(WorkloadSpec::new(WorkloadName::Regulator).weight(Template::GetSystemLogs), 31.0);
    }

    #[test]
    fn names_parse() {
        for t in Template::ALL {
            assert_eq!(t.name().parse::<Template>().unwrap(), t);
        }
        assert_eq!("Regulator".parse::<WorkloadName>().unwrap(), WorkloadName::Regulator);
    }

    #[test]
    fn weight_overrides_are_checked() {
        let mut s = WorkloadSpec::new(WorkloadName::Regulator);
        assert!(s.set_weight(Template::CreateRecord, 5.0).is_err());
        s.set_weight(Template::GetSystemLogs, 40.0).unwrap();
        assert!(s.validate().is_err());
        WorkloadSpec::single(Template::VerifyDeletion).validate().unwrap();
    }
}
