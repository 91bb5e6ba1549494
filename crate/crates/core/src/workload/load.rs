use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::record::{Metadata, PersonalRecord, ValueSet};

/// Shape of the synthetic data set and the records later created by the
/// controller workload.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadSpec {
    pub record_count: usize,
    pub users: usize,
    pub purposes: usize,
    pub partners: usize,
    pub key_len: usize,
    pub data_len: usize,
    /// Target byte count of all metadata values of a fresh record. SRC is
    /// padded to reach it.
    pub metadata_len: usize,
    pub ttl_short_s: u64,
    pub ttl_long_s: u64,
    pub ttl_short_share: f64,
    pub seed: u64,
    /// Number of disjoint key partitions (one per worker).
    pub partitions: usize,
}

impl Default for LoadSpec {
    fn default() -> Self {
        LoadSpec::with_records(100_000)
    }
}

impl LoadSpec {
    /// Defaults scaled to `record_count`: ten records per user and per purpose.
    pub fn with_records(record_count: usize) -> Self {
        LoadSpec {
            record_count,
            users: (record_count / 10).max(1),
            purposes: (record_count / 10).max(1),
            partners: 100,
            key_len: 8,
            data_len: 10,
            metadata_len: 25,
            ttl_short_s: 300,
            ttl_long_s: 432_000,
            ttl_short_share: 0.2,
            seed: 0,
            partitions: 1,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.record_count == 0 {
            return Err("recordcount must be positive".into());
        }
        if self.users == 0 || self.purposes == 0 || self.partners == 0 {
            return Err("user, purpose and partner populations must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.ttl_short_share) {
            return Err(format!("ttl_short_share must lie in [0, 1], got {}", self.ttl_short_share));
        }
        if self.key_len < 2 || self.data_len == 0 {
            return Err("key length must be at least 2 and data length positive".into());
        }
        let w = self.partitions;
        if w == 0 {
            return Err("partition count must be positive".into());
        }
        for (what, n) in [("users", self.users), ("purposes", self.purposes), ("partners", self.partners)] {
            if n % w != 0 {
                return Err(format!("{what} ({n}) must be a multiple of the worker count ({w})"));
            }
        }
        Ok(())
    }

    /// Partition owning record index `i`.
    pub fn partition_of(&self, i: u64) -> usize {
        (i % self.partitions as u64) as usize
    }

    pub fn key(&self, i: u64) -> String {
        format!("k{:0w$}", i, w = self.key_len - 1)
    }

    pub fn user(&self, u: usize) -> String {
        format!("u{:0w$}", u, w = digits(self.users))
    }

    pub fn purpose(&self, p: usize) -> String {
        format!("p{:0w$}", p, w = digits(self.purposes))
    }

    pub fn partner(&self, s: usize) -> String {
        format!("s{:0w$}", s, w = digits(self.partners))
    }

    /// Owner index of record `i` (round-robin).
    pub fn user_of(&self, i: u64) -> usize {
        (i % self.users as u64) as usize
    }

    /// Deterministic short/long assignment: exactly `floor(n * share)` of
    /// the first `n` records are short-lived.
    pub fn is_short(&self, i: u64) -> bool {
        let s = self.ttl_short_share;
        ((i + 1) as f64 * s).floor() > (i as f64 * s).floor()
    }

    /// Uniform index into a partition-local slice of a vocabulary of size `n`.
    pub fn local_index<R: Rng + ?Sized>(&self, rng: &mut R, n: usize, partition: usize) -> usize {
        let w = self.partitions;
        rng.random_range(0..n / w) * w + partition
    }

    /// Record number `i`. Each record has its own random stream, so the
    /// value does not depend on which other records were generated.
    pub fn record(&self, i: u64) -> PersonalRecord {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(i);
        let part = self.partition_of(i);
        let data: String = (0..self.data_len).map(|_| char::from(b'0' + rng.random_range(0..10u8))).collect();
        let pur = self.purpose(self.local_index(&mut rng, self.purposes, part));
        let shr = self.partner(self.local_index(&mut rng, self.partners, part));
        let mut meta = Metadata {
            pur: ValueSet::from([pur]),
            ttl: if self.is_short(i) { self.ttl_short_s } else { self.ttl_long_s },
            usr: self.user(self.user_of(i)),
            obj: ValueSet::new(),
            dec: ValueSet::new(),
            shr: ValueSet::from([shr]),
            src: ValueSet::new(),
        };
        let src_len = self.metadata_len.saturating_sub(meta.value_bytes()).max(2);
        meta.src.insert(format!("o{:0w$}", rng.random_range(0..4u8), w = src_len - 1));
        PersonalRecord::new(self.key(i), data, meta)
    }
}

fn digits(n: usize) -> usize {
    n.saturating_sub(1).to_string().len()
}
