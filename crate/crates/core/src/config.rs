//! Optimizer configuration shared by every numerical search in the crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the pattern-search step length evolves.
///
/// * `Halving` — start at a quarter of the search radius, double on a
///   successful poll (capped at the radius), halve when a full poll fails.
/// * `Geometric { factor }` — same, but shrink by `factor` in (0,1) instead
///   of 0.5 and never grow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    Halving,
    Geometric { factor: f64 },
}

impl Default for StepSchedule {
    fn default() -> Self {
        StepSchedule::Halving
    }
}

/// Configuration for the multi-start local searches behind quantifier
/// evaluation, subspace distances, and copy distances.
///
/// `max_iters` counts poll sweeps per restart. Nested quantifier blocks run
/// with `max_iters / 4` sweeps and `max(1, restarts / 4)` restarts so that the
/// total budget stays bounded; the split is part of the evaluation contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub tolerance: f64,
    pub seed: u64,
    #[serde(default)]
    pub step_schedule: StepSchedule,
}

impl Default for OptConfig {
    fn default() -> Self {
        OptConfig {
            restarts: 8,
            max_iters: 240,
            tolerance: 1e-9,
            seed: 0,
            step_schedule: StepSchedule::Halving,
        }
    }
}

impl OptConfig {
    pub fn with_seed(seed: u64) -> Self {
        OptConfig { seed, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::ConfigError("restarts must be >= 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::ConfigError("max_iters must be >= 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::ConfigError("tolerance must be > 0".into()));
        }
        if let StepSchedule::Geometric { factor } = self.step_schedule {
            if !(factor > 0.0 && factor < 1.0) {
                return Err(Error::ConfigError("geometric factor must lie in (0,1)".into()));
            }
        }
        Ok(())
    }

    /// Budget for a quantifier block nested below another one.
    pub fn nested(&self) -> OptConfig {
        OptConfig {
            restarts: (self.restarts / 4).max(1),
            max_iters: (self.max_iters / 4).clamp(8, 60),
            ..self.clone()
        }
    }
}

/// Deterministic seed derivation (splitmix64 over a salt chain).
pub fn derive_seed(base: u64, salts: &[u64]) -> u64 {
    let mut x = base;
    for &s in salts {
        x = x.wrapping_add(0x9e3779b97f4a7c15).wrapping_add(s.wrapping_mul(0xbf58476d1ce4e5b9));
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        x = z ^ (z >> 31);
    }
    x
}
