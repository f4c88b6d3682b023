//! Experiment configuration file (TOML, `version = 1`).
//!
//! ```toml
//! version = 1
//! seed = 7
//! training_trials = 140
//! trials_per_condition = 35
//! block_order = "counterbalanced"   # explicit-first | implicit-first | counterbalanced
//!
//! [agent]      # AgentConfig: c, alpha0, alpha_min, epsilon0, epsilon_min, gamma,
//!              # q_init, convergence_k, max_trials
//! [profile]    # PreferenceProfile
//! [erp]        # ErpModel
//! [decoder]    # GridSearchConfig
//! [cleaning]   # amplitude_threshold_uv, tukey_k
//! [live]       # rating_timeout_ms, training_per_condition
//! ```
//!
//! Unknown keys are rejected and the error names the key.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bandit::AgentConfig;
use crate::decoder::{CleaningConfig, GridSearchConfig};
use crate::error::{Error, Result};
use crate::sim::{ErpModel, PreferenceProfile};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockOrder {
    ExplicitFirst,
    ImplicitFirst,
    Counterbalanced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleaningSection {
    pub amplitude_threshold_uv: f64,
    pub tukey_k: f64,
}

impl Default for CleaningSection {
    fn default() -> Self {
        let c = CleaningConfig::default();
        Self {
            amplitude_threshold_uv: c.amplitude_threshold_uv,
            tukey_k: c.tukey_k,
        }
    }
}

impl From<&CleaningSection> for CleaningConfig {
    fn from(s: &CleaningSection) -> Self {
        CleaningConfig {
            amplitude_threshold_uv: s.amplitude_threshold_uv,
            tukey_k: s.tukey_k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiveConfig {
    /// A trial without a rating for this long aborts the block (checkpointed).
    pub rating_timeout_ms: u64,
    /// Rated warm-up trials per condition before the adaptive block; they
    /// define the ground-truth condition. 0 disables the warm-up.
    pub training_per_condition: usize,
}

impl Default for LiveConfig {
    fn default() -> Self {
        Self {
            rating_timeout_ms: 120_000,
            training_per_condition: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub seed: u64,
    pub training_trials: usize,
    pub trials_per_condition: usize,
    pub block_order: BlockOrder,
    pub agent: AgentConfig,
    pub profile: PreferenceProfile,
    pub erp: ErpModel,
    pub decoder: GridSearchConfig,
    pub cleaning: CleaningSection,
    pub live: LiveConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: 0,
            training_trials: 140,
            trials_per_condition: 35,
            block_order: BlockOrder::Counterbalanced,
            agent: AgentConfig::default(),
            profile: PreferenceProfile::default(),
            erp: ErpModel::default(),
            decoder: GridSearchConfig::default(),
            cleaning: CleaningSection::default(),
            live: LiveConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Loads a config file, or a shipped preset when given `preset:<name>`.
    pub fn load(path_or_preset: &str) -> Result<Self> {
        if let Some(name) = path_or_preset.strip_prefix("preset:") {
            return preset(name);
        }
        let text = std::fs::read_to_string(Path::new(path_or_preset))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "version: unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.training_trials != 4 * self.trials_per_condition {
            return Err(Error::Config(format!(
                "training_trials ({}) must equal 4 x trials_per_condition ({})",
                self.training_trials, self.trials_per_condition
            )));
        }
        self.agent.validate()?;
        self.profile.validate()?;
        self.erp.validate()?;
        let d = &self.decoder;
        if d.step == 0 || d.min_features == 0 || d.min_features > d.max_features || d.max_features > d.top_k {
            return Err(Error::Config(
                "decoder: require 0 < min_features <= max_features <= top_k and step > 0".into(),
            ));
        }
        if !(0.0 < d.test_fraction && d.test_fraction < 1.0) {
            return Err(Error::Config("decoder.test_fraction must lie in (0, 1)".into()));
        }
        if !(0.0 <= d.norm_lo_percentile && d.norm_lo_percentile < d.norm_hi_percentile && d.norm_hi_percentile <= 1.0) {
            return Err(Error::Config("decoder: require 0 <= norm_lo_percentile < norm_hi_percentile <= 1".into()));
        }
        if !(self.cleaning.tukey_k >= 0.0 && self.cleaning.amplitude_threshold_uv > 0.0) {
            return Err(Error::Config("cleaning: tukey_k >= 0 and amplitude_threshold_uv > 0 required".into()));
        }
        Ok(())
    }

    pub fn max_trials(&self) -> usize {
        self.agent.max_trials
    }

    /// Explicit block first? Counterbalanced order alternates with the run
    /// index in batch mode and with the seed otherwise.
    pub fn explicit_first(&self, run_index: Option<usize>) -> bool {
        match self.block_order {
            BlockOrder::ExplicitFirst => true,
            BlockOrder::ImplicitFirst => false,
            BlockOrder::Counterbalanced => match run_index {
                Some(i) => i % 2 == 0,
                None => self.seed.is_multiple_of(2),
            },
        }
    }
}

pub const PRESET_NAMES: [&str; 5] = ["paper-calibrated", "graded-rater", "binary-rater", "drifting-rater", "zero-noise"];

pub fn preset_text(name: &str) -> Option<&'static str> {
    Some(match name {
        "paper-calibrated" => include_str!("../../presets/paper-calibrated.toml"),
        "graded-rater" => include_str!("../../presets/graded-rater.toml"),
        "binary-rater" => include_str!("../../presets/binary-rater.toml"),
        "drifting-rater" => include_str!("../../presets/drifting-rater.toml"),
        "zero-noise" => include_str!("../../presets/zero-noise.toml"),
        _ => return None,
    })
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let text = preset_text(name).ok_or_else(|| {
        Error::Config(format!("unknown preset {name:?} (known: {})", PRESET_NAMES.join(", ")))
    })?;
    ExperimentConfig::from_toml(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse() {
        for name in PRESET_NAMES {
            preset(name).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(preset("nope").is_err());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ExperimentConfig::from_toml("version = 1\n[agent]\nbogus_rate = 3\n").unwrap_err();
        assert!(err.to_string().contains("bogus_rate"), "{err}");
        let err = ExperimentConfig::from_toml("version = 1\nfoo = 2\n").unwrap_err();
        assert!(err.to_string().contains("foo"), "{err}");
    }

    #[test]
    fn training_trials_invariant() {
        let err = ExperimentConfig::from_toml("version = 1\ntraining_trials = 100\n").unwrap_err();
        assert!(err.to_string().contains("training_trials"));
    }

    #[test]
    fn version_checked() {
        assert!(ExperimentConfig::from_toml("version = 2\n").is_err());
    }

    #[test]
    fn toml_roundtrip() {
        let cfg = preset("paper-calibrated").unwrap();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
    }

    #[test]
    fn counterbalancing() {
        let cfg = ExperimentConfig::default();
        assert!(cfg.explicit_first(Some(0)));
        assert!(!cfg.explicit_first(Some(1)));
        let cfg = ExperimentConfig {
            block_order: BlockOrder::ImplicitFirst,
            ..ExperimentConfig::default()
        };
        assert!(!cfg.explicit_first(Some(0)));
    }
}
