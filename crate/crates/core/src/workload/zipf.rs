use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Zipf};

/// Default skew, the conventional value of YCSB-style key choosers.
pub const DEFAULT_THETA: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistributionKind {
    Uniform,
    Zipf { theta: f64 },
}

impl DistributionKind {
    pub fn zipf() -> Self {
        DistributionKind::Zipf { theta: DEFAULT_THETA }
    }
}

impl fmt::Display for DistributionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistributionKind::Uniform => f.write_str("uniform"),
            DistributionKind::Zipf { theta } => write!(f, "zipfian({theta})"),
        }
    }
}

impl FromStr for DistributionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "uniform" => Ok(DistributionKind::Uniform),
            "zipfian" | "zipf" => Ok(DistributionKind::zipf()),
            other => Err(format!("unknown distribution {other:?}")),
        }
    }
}

/// Rank sampler over `1..=n`. For Zipf, `P(i) ∝ 1/i^theta`.
#[derive(Debug, Clone, Copy)]
pub struct RankSampler {
    n: usize,
    zipf: Option<Zipf<f64>>,
}

impl RankSampler {
    pub fn new(kind: DistributionKind, n: usize) -> Result<Self, String> {
        if n == 0 {
            return Err("population must be positive".into());
        }
        let zipf = match kind {
            DistributionKind::Uniform => None,
            DistributionKind::Zipf { theta } => {
                if !(theta > 0.0 && theta.is_finite()) {
                    return Err(format!("zipf theta must be positive, got {theta}"));
                }
                Some(Zipf::new(n as f64, theta).map_err(|e| e.to_string())?)
            }
        };
        Ok(RankSampler { n, zipf })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match &self.zipf {
            None => rng.random_range(1..=self.n),
            Some(z) => (z.sample(rng) as usize).clamp(1, self.n),
        }
    }
}

/// Analytic pmf of rank `i` under Zipf(`theta`) over `1..=n`.
pub fn zipf_pmf(i: usize, n: usize, theta: f64) -> f64 {
    let norm: f64 = (1..=n).map(|k| (k as f64).powf(-theta)).sum();
    (i as f64).powf(-theta) / norm
}
