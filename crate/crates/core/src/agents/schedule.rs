//! Threshold schedules computed once, ahead of play.

use alloc::vec::Vec;

use super::ccc::{BankStats, RolloutBanks};
use super::CccPolicies;
use crate::pomg::{Environment, Seat};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Provenance {
    Precomputed,
    Online,
}

/// Per-turn rollout statistics and the thresholds they imply.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSchedule {
    pub alpha: f64,
    pub q: f64,
    pub k: usize,
    pub provenance: Provenance,
    stats: Vec<BankStats>,
}

impl ThresholdSchedule {
    pub fn new(alpha: f64, q: f64, k: usize, provenance: Provenance, stats: Vec<BankStats>) -> Self {
        ThresholdSchedule { alpha, q, k, provenance, stats }
    }

    /// Statistics after turns `1..=horizon`.
    pub fn stats(&self) -> &[BankStats] {
        &self.stats
    }

    pub fn horizon(&self) -> usize {
        self.stats.len()
    }

    /// Threshold after turn `t` (1-based).
    pub fn threshold(&self, t: usize) -> Option<f64> {
        t.checked_sub(1).and_then(|i| self.stats.get(i)).map(|s| s.threshold(self.alpha))
    }

    pub fn thresholds(&self) -> Vec<f64> {
        self.stats.iter().map(|s| s.threshold(self.alpha)).collect()
    }
}

/// Runs the `k` + `k` rollout banks for `horizon` turns up front.
///
/// With the same seed this reproduces exactly what an online CCC agent sees.
#[allow(clippy::too_many_arguments)]
pub fn precompute_thresholds<E: Environment + ?Sized>(
    env: &E,
    policies: &CccPolicies,
    seat: Seat,
    alpha: f64,
    q: f64,
    k: usize,
    horizon: usize,
    seed: u64,
) -> Result<ThresholdSchedule> {
    if horizon == 0 {
        return Err(Error::invalid("horizon", "must be at least 1"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha", "must lie strictly between 0 and 1"));
    }
    let mut banks = RolloutBanks::new(env, policies.clone(), seat, q, k, seed)?;
    let stats = (0..horizon).map(|_| banks.step()).collect::<Result<Vec<_>>>()?;
    Ok(ThresholdSchedule::new(alpha, q, k, Provenance::Precomputed, stats))
}
