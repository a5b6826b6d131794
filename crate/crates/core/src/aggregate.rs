//! Mergeable per-worker tallies.
//!
//! All tallies are integer counts, so merging is exactly commutative and
//! associative and the final summary does not depend on how replicas were
//! split across workers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::CanonicalConfig;

pub trait Aggregate: Sized {
    fn merge(&mut self, other: Self) -> Result<()>;
}

/// Merges worker partials in the given order.
pub fn merge_all<A: Aggregate>(mut partials: impl Iterator<Item = A>, empty: A) -> Result<A> {
    let mut acc = partials.next().unwrap_or(empty);
    for p in partials {
        acc.merge(p)?;
    }
    Ok(acc)
}

/// Fingerprints must agree unless one side is the identity (`None`).
fn merge_fingerprint(a: &mut Option<u64>, b: Option<u64>) -> Result<()> {
    match (*a, b) {
        (Some(x), Some(y)) if x != y => Err(Error::usage(format!(
            "cannot merge tallies from different runs ({x:016x} vs {y:016x})"
        ))),
        (None, Some(y)) => {
            *a = Some(y);
            Ok(())
        }
        _ => Ok(()),
    }
}

/// Final canonical states of surviving replicas.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateCounts {
    pub fingerprint: Option<u64>,
    pub replicas: u64,
    pub survivors: u64,
    pub counts: BTreeMap<CanonicalConfig, u64>,
}

impl StateCounts {
    pub fn new(fingerprint: u64) -> Self {
        StateCounts { fingerprint: Some(fingerprint), ..Default::default() }
    }

    pub fn record(&mut self, state: Option<CanonicalConfig>) {
        self.replicas += 1;
        if let Some(c) = state {
            self.survivors += 1;
            *self.counts.entry(c).or_insert(0) += 1;
        }
    }
}

impl Aggregate for StateCounts {
    fn merge(&mut self, other: Self) -> Result<()> {
        merge_fingerprint(&mut self.fingerprint, other.fingerprint)?;
        self.replicas += other.replicas;
        self.survivors += other.survivors;
        for (k, v) in other.counts {
            *self.counts.entry(k).or_insert(0) += v;
        }
        Ok(())
    }
}

/// Number of replicas alive at each point of a time grid.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurvivalTally {
    pub fingerprint: Option<u64>,
    pub replicas: u64,
    pub alive: Vec<u64>,
}

impl SurvivalTally {
    pub fn new(fingerprint: u64, grid_len: usize) -> Self {
        SurvivalTally { fingerprint: Some(fingerprint), replicas: 0, alive: vec![0; grid_len] }
    }

    /// Records one replica with absorption time `tau` (`None`: alive past the grid).
    pub fn record(&mut self, grid: &[f64], tau: Option<f64>) {
        self.replicas += 1;
        for (a, &t) in self.alive.iter_mut().zip(grid) {
            if tau.is_none_or(|tau| tau > t) {
                *a += 1;
            }
        }
    }
}

impl Aggregate for SurvivalTally {
    fn merge(&mut self, other: Self) -> Result<()> {
        merge_fingerprint(&mut self.fingerprint, other.fingerprint)?;
        if self.alive.is_empty() {
            self.alive = other.alive;
        } else if !other.alive.is_empty() {
            if self.alive.len() != other.alive.len() {
                return Err(Error::usage("survival tallies on different grids"));
            }
            for (a, b) in self.alive.iter_mut().zip(other.alive) {
                *a += b;
            }
        }
        self.replicas += other.replicas;
        Ok(())
    }
}

impl<A: Aggregate, B: Aggregate> Aggregate for (A, B) {
    fn merge(&mut self, other: Self) -> Result<()> {
        self.0.merge(other.0)?;
        self.1.merge(other.1)
    }
}

impl<T> Aggregate for Vec<T> {
    /// Concatenation; used for per-replica rows where order is by replica index.
    fn merge(&mut self, other: Self) -> Result<()> {
        self.extend(other);
        Ok(())
    }
}
