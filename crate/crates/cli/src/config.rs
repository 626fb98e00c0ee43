// SPDX-License-Identifier: Apache-2.0

//! Optional TOML defaults. Command-line flags win over the file.

use std::path::Path;

use scout_core::sim::bench::BenchConfig;
use scout_core::sim::GeneratorConfig;
use scout_core::{Error, Result};
use serde::{Deserialize, Serialize};

pub const CONFIG_ENV: &str = "SCOUT_CONFIG";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub window: Option<u64>,
    pub threshold: Option<f64>,
    /// Replaces the profile's generator settings wholesale.
    pub generator: Option<GeneratorConfig>,
    pub inject: InjectDefaults,
    pub bench: Option<BenchConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InjectDefaults {
    pub mix: Option<f64>,
    pub fraction: Option<(f64, f64)>,
    pub noise: Option<usize>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_partial_file() {
        let c: Config = toml::from_str("seed = 4\n[inject]\nmix = 0.25\nfraction = [0.1, 0.5]\n").unwrap();
        assert_eq!(c.seed, Some(4));
        assert_eq!(c.inject.mix, Some(0.25));
        assert_eq!(c.inject.fraction, Some((0.1, 0.5)));
        assert!(c.generator.is_none());
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(toml::from_str::<Config>("sed = 4\n").is_err());
    }
}
