//! Per-transition rewards and their clip-then-tanh normalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reward component weights. Defaults follow the component importance
/// ordering: DRV improvement, iteration penalty and convergence dominate,
/// the stuck penalty is minor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub improvement: f64,
    pub iteration_penalty: f64,
    pub convergence_bonus: f64,
    pub stuck_penalty: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            improvement: 1.0,
            iteration_penalty: 0.1,
            convergence_bonus: 1.0,
            stuck_penalty: 0.05,
        }
    }
}

impl RewardConfig {
    /// Raw reward for going from `prev_drvs` to `cur_drvs` in one iteration.
    /// `initial_drvs` is the DRV count after the first iteration of the run.
    pub fn raw_reward(&self, prev_drvs: u32, cur_drvs: u32, converged_now: bool, initial_drvs: u32) -> f64 {
        let (prev, cur) = (prev_drvs as f64, cur_drvs as f64);
        let mut r = self.improvement * (prev - cur) / (initial_drvs as f64).max(1.0);
        r -= self.iteration_penalty;
        if converged_now {
            r += self.convergence_bonus;
        }
        if cur >= prev && cur > 0.0 {
            r -= self.stuck_penalty;
        }
        r
    }
}

pub fn raw_reward(prev_drvs: u32, cur_drvs: u32, converged_now: bool, initial_drvs: u32) -> f64 {
    RewardConfig::default().raw_reward(prev_drvs, cur_drvs, converged_now, initial_drvs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardStats {
    pub p1: f64,
    pub p99: f64,
}

/// Minimum sample count for which percentiles are estimated; smaller
/// samples clip to their min and max.
pub const MIN_PERCENTILE_SAMPLES: usize = 100;

/// Percentile `q` in `[0, 1]` of sorted data, linearly interpolated between
/// closest ranks.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn fit_reward_stats(raw: &[f64]) -> Result<RewardStats> {
    if raw.is_empty() {
        return Err(Error::Empty("no rewards to fit"));
    }
    let mut sorted = raw.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.len() < MIN_PERCENTILE_SAMPLES {
        return Ok(RewardStats {
            p1: sorted[0],
            p99: sorted[sorted.len() - 1],
        });
    }
    Ok(RewardStats {
        p1: percentile(&sorted, 0.01),
        p99: percentile(&sorted, 0.99),
    })
}

impl RewardStats {
    pub fn clip(&self, r: f64) -> f64 {
        r.clamp(self.p1, self.p99)
    }

    pub fn normalize(&self, r: f64) -> f64 {
        self.clip(r).tanh()
    }
}

pub fn normalize_reward(stats: &RewardStats, r: f64) -> f64 {
    stats.normalize(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn halving_drvs() {
        assert!((raw_reward(100, 50, false, 100) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn converging_step() {
        assert!((raw_reward(10, 0, true, 100) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn stuck_step() {
        assert!((raw_reward(50, 50, false, 100) + 0.15).abs() < 1e-15);
    }

    #[test]
    fn zero_maps_to_zero() {
        let s = RewardStats { p1: -1.0, p99: 1.0 };
        assert_eq!(s.normalize(0.0), 0.0);
    }

    #[test]
    fn above_p99_saturates() {
        let s = RewardStats { p1: -0.3, p99: 0.8 };
        assert_eq!(s.normalize(5.0), s.normalize(0.8));
        assert_eq!(s.normalize(5.0), 0.8f64.tanh());
    }

    #[test]
    fn three_level_sample() {
        let raw: Vec<f64> = (0..300).map(|i| (i % 3) as f64 - 1.0).collect();
        let s = fit_reward_stats(&raw).unwrap();
        assert_eq!((s.p1, s.p99), (-1.0, 1.0));
        assert!((s.normalize(5.0) - 0.761_594_155_955_764_9).abs() < 1e-12);
    }

    #[test]
    fn small_sample_uses_extremes() {
        let s = fit_reward_stats(&[0.3, -2.0, 1.5]).unwrap();
        assert_eq!((s.p1, s.p99), (-2.0, 1.5));
        assert!(fit_reward_stats(&[]).is_err());
    }

    #[test]
    fn interpolated_percentile() {
        let xs: Vec<f64> = (0..=100).map(f64::from).collect();
        assert_eq!(percentile(&xs, 0.01), 1.0);
        assert_eq!(percentile(&xs, 0.99), 99.0);
        let xs: Vec<f64> = (0..200).map(f64::from).collect();
        // position 0.01 * 199 = 1.99
        assert!((percentile(&xs, 0.01) - 1.99).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn normalized_is_monotone_and_bounded(a in -50.0f64..50.0, b in -50.0f64..50.0) {
            let s = RewardStats { p1: -1.2, p99: 1.7 };
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(s.normalize(lo) <= s.normalize(hi));
            prop_assert!(s.normalize(a) > -1.0 && s.normalize(a) < 1.0);
            prop_assert_eq!(s.normalize(a), s.normalize(s.clip(a)));
        }
    }
}
