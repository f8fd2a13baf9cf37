use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pairgen::Tier;
use crate::raster::TraversabilityMap;

/// Sample mean and population standard deviation of one tier's scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierStats {
    pub tier: Tier,
    pub mean: f64,
    pub std: f64,
    pub n: u64,
}

impl TierStats {
    pub fn from_scores(tier: Tier, scores: &[f64]) -> Result<Self> {
        let mut acc = TierStatsAccumulator::default();
        for &s in scores {
            acc.push(s);
        }
        acc.finish(tier)
    }
}

/// Streaming mean/variance (Welford).
#[derive(Debug, Clone, Copy, Default)]
pub struct TierStatsAccumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl TierStatsAccumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn finish(&self, tier: Tier) -> Result<TierStats> {
        if self.n == 0 {
            return Err(Error::EmptyTier(tier));
        }
        Ok(TierStats {
            tier,
            mean: self.mean,
            std: (self.m2 / self.n as f64).max(0.0).sqrt(),
            n: self.n,
        })
    }
}

/// Score boundaries between adjacent tiers: `cutoffs[0]` separates tier 3
/// from tier 2, `cutoffs[1]` tier 2 from 1, `cutoffs[2]` tier 1 from 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierCutoffs {
    pub cutoff_3: f64,
    pub cutoff_2: f64,
    pub cutoff_1: f64,
    pub stats: Vec<TierStats>,
}

impl TierCutoffs {
    pub fn from_stats(stats: [TierStats; 4]) -> Result<Self> {
        // cutoff_N = ((mu_N - sigma_N) + (mu_{N-1} + sigma_{N-1})) / 2
        let cut = |n: usize| ((stats[n].mean - stats[n].std) + (stats[n - 1].mean + stats[n - 1].std)) / 2.0;
        let c = [cut(3), cut(2), cut(1)];
        if !(c[0] > c[1] && c[1] > c[2]) {
            return Err(Error::NonMonotoneCutoffs(c));
        }
        Ok(Self {
            cutoff_3: c[0],
            cutoff_2: c[1],
            cutoff_1: c[2],
            stats: stats.to_vec(),
        })
    }

    pub fn values(&self) -> [f64; 3] {
        [self.cutoff_3, self.cutoff_2, self.cutoff_1]
    }
}

/// Cutoffs from per-tier training scores (tiers 0..=3, each non-empty).
pub fn tier_cutoffs(train_scores: &BTreeMap<Tier, Vec<f64>>) -> Result<TierCutoffs> {
    let empty = Vec::new();
    let stat = |t: Tier| TierStats::from_scores(t, train_scores.get(&t).unwrap_or(&empty));
    TierCutoffs::from_stats([stat(0)?, stat(1)?, stat(2)?, stat(3)?])
}

/// A score enters a higher tier only when it exceeds that tier's cutoff.
pub fn tier_of(score: f64, cutoffs: &TierCutoffs) -> Tier {
    if score > cutoffs.cutoff_3 {
        3
    } else if score > cutoffs.cutoff_2 {
        2
    } else if score > cutoffs.cutoff_1 {
        1
    } else {
        0
    }
}

pub fn discretize(map: &TraversabilityMap, cutoffs: &TierCutoffs) -> Vec<Tier> {
    map.values().iter().map(|&s| tier_of(s, cutoffs)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(pairs: &[(Tier, Vec<f64>)]) -> BTreeMap<Tier, Vec<f64>> {
        pairs.iter().cloned().collect()
    }

    #[test]
    fn hand_computed_cutoff() {
        // tier 3: mean 0.9, std 0.05; tier 2: mean 0.6, std 0.1
        let s = scores(&[
            (3, vec![0.85, 0.95]),
            (2, vec![0.5, 0.7]),
            (1, vec![0.3, 0.3]),
            (0, vec![0.1]),
        ]);
        let c = tier_cutoffs(&s).unwrap();
        assert!((c.cutoff_3 - 0.775).abs() < 1e-12);
        assert!((c.stats[3].mean - 0.9).abs() < 1e-12);
        assert!((c.stats[3].std - 0.05).abs() < 1e-12);
    }

    #[test]
    fn zero_spread_reduces_to_midpoints() {
        let s = scores(&[(3, vec![0.8]), (2, vec![0.6; 3]), (1, vec![0.4; 2]), (0, vec![0.2])]);
        let c = tier_cutoffs(&s).unwrap();
        for (got, want) in c.values().iter().zip([0.7, 0.5, 0.3]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn identical_tiers_are_non_monotone() {
        let s = scores(&[(3, vec![0.5]), (2, vec![0.5]), (1, vec![0.5]), (0, vec![0.5])]);
        assert!(matches!(tier_cutoffs(&s), Err(Error::NonMonotoneCutoffs(_))));
    }

    #[test]
    fn empty_tier_errors() {
        let s = scores(&[(3, vec![0.8]), (2, vec![0.6]), (0, vec![0.2])]);
        assert!(matches!(tier_cutoffs(&s), Err(Error::EmptyTier(1))));
    }

    #[test]
    fn discretization_boundaries() {
        let s = scores(&[(3, vec![0.8]), (2, vec![0.6]), (1, vec![0.4]), (0, vec![0.2])]);
        let c = tier_cutoffs(&s).unwrap();
        assert_eq!(tier_of(0.99, &c), 3);
        assert_eq!(tier_of(c.cutoff_2, &c), 1);
        assert_eq!(tier_of(0.0, &c), 0);
        let map = TraversabilityMap::new(1, 4, vec![0.99, 0.6, 0.4, 0.0]).unwrap();
        assert_eq!(discretize(&map, &c), vec![3, 2, 1, 0]);
    }
}
