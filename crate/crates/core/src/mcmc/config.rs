use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Chain layout and adaptation settings.
///
/// Each chain runs `n_adapt` adapting iterations, `n_burnin` frozen
/// iterations that are discarded, then `n_iter` iterations of which every
/// `thin`-th is kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub n_chains: usize,
    pub n_adapt: usize,
    pub n_burnin: usize,
    pub n_iter: usize,
    pub thin: usize,
    /// Acceptance target for univariate updates.
    pub target_accept: f64,
    /// Acceptance target for vector blocks.
    pub target_accept_block: f64,
    pub seed: u64,
    /// Start every subject with λ1 above λ2 on biphasic links.
    pub ordering_constraint: bool,
    /// Sample cGAL contamination indicators and update α by its conjugate Beta
    /// step instead of integrating the indicators out.
    pub augmented: bool,
    pub keep_random_effects: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_chains: 4,
            n_adapt: 2000,
            n_burnin: 3000,
            n_iter: 10_000,
            thin: 5,
            target_accept: 0.44,
            target_accept_block: 0.234,
            seed: 20_240_101,
            ordering_constraint: true,
            augmented: false,
            keep_random_effects: true,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_chains", self.n_chains),
            ("n_adapt", self.n_adapt),
            ("n_burnin", self.n_burnin),
            ("n_iter", self.n_iter),
            ("thin", self.thin),
        ];
        for (name, v) in counts {
            if v < 1 {
                return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        if self.n_iter < self.thin {
            return Err(Error::InvalidConfig("n_iter must be at least thin".into()));
        }
        for (name, v) in [
            ("target_accept", self.target_accept),
            ("target_accept_block", self.target_accept_block),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        Ok(())
    }

    /// Rows retained per chain.
    pub fn n_kept(&self) -> usize {
        self.n_iter / self.thin
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_validation() {
        let c = SamplerConfig::default();
        assert!(c.validate().is_ok());
        assert_eq!(c.n_kept(), 2000);
        let bad = SamplerConfig { thin: 0, ..c.clone() };
        assert!(bad.validate().is_err());
        let bad = SamplerConfig {
            target_accept: 1.0,
            ..c
        };
        assert!(bad.validate().is_err());
    }
}
