//! Pipeline configuration file (TOML).
//!
//! Every section and key is optional; missing values take their defaults.
//!
//! ```toml
//! [reward]
//! improvement = 1.0
//! iteration_penalty = 0.1
//! convergence_bonus = 1.0
//! stuck_penalty = 0.05
//!
//! [router]
//! max_iterations = 64
//!
//! [cql]
//! actor_lr = 1e-3
//! critic_lr = 4e-3
//! conservative_weight = 0.8
//! batch_size = 128
//! max_epochs = 200
//! optimizer = "sgd"
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cql::CqlConfig;
use crate::error::{Error, Result};
use crate::reward::RewardConfig;
use crate::router::DEFAULT_MAX_ITERATIONS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RouterConfig {
    pub max_iterations: usize,
}

impl Default for RouterConfig {
    fn default() -> Self {
        RouterConfig {
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub reward: RewardConfig,
    pub router: RouterConfig,
    pub cql: CqlConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Parse {
            what: "config".into(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.router.max_iterations == 0 {
            return Err(Error::InvalidArgument("router.max_iterations must be positive".into()));
        }
        self.cql.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(Config::from_toml("").unwrap(), Config::default());
    }

    #[test]
    fn round_trip() {
        let mut cfg = Config::default();
        cfg.cql.max_epochs = 7;
        cfg.reward.stuck_penalty = 0.2;
        assert_eq!(Config::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(Config::from_toml("[cql]\nlearning_rate = 1.0\n").is_err());
        assert!(Config::from_toml("[router]\nmax_iterations = 0\n").is_err());
        assert!(Config::from_toml("[cql]\ntemperature_lr = 0.5\n").is_err());
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let cfg = Config::from_toml("[cql]\nseed = 9\noptimizer = \"adam\"\n").unwrap();
        assert_eq!(cfg.cql.seed, 9);
        assert_eq!(cfg.cql.batch_size, 128);
        assert_eq!(cfg.cql.optimizer, crate::cql::OptimizerKind::Adam);
    }
}
