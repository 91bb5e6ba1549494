//! Synthetic data set and the four role workloads.

pub mod generator;
pub mod load;
pub mod props;
pub mod spec;
pub mod zipf;

pub use generator::{validate_lifecycle, GeneratedOp, Generator, GeneratorStats};
pub use load::LoadSpec;
pub use props::Properties;
pub use spec::{Template, WorkloadName, WorkloadSpec, DEFAULT_OPERATION_COUNT};
pub use zipf::{zipf_pmf, DistributionKind, RankSampler, DEFAULT_THETA};
