//! Run configuration: one section per component, starting from a named
//! preset and overlaid with a TOML file.
//!
//! Only the keys present in the file replace preset values; unknown keys
//! are rejected.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::GaConfig;
use crate::data::{ColumnMapping, FilterConfig, SplitConfig, SynthConfig};
use crate::env::RewardConfig;
use crate::kinematics::KinematicsConfig;
use crate::rl::{CloningConfig, DdpgConfig, DdqnConfig, PpoConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown preset '{0}' (expected paper or desk)")]
    UnknownPreset(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Full-length training budgets.
    Paper,
    /// Budgets shrunk to run on a laptop in minutes.
    Desk,
}

impl FromStr for Preset {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(Preset::Paper),
            "desk" => Ok(Preset::Desk),
            other => Err(ConfigError::UnknownPreset(other.into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Test events that get trajectory tables and overlay plots.
    pub trajectory_events: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self { trajectory_events: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub kinematics: KinematicsConfig,
    pub reward: RewardConfig,
    pub synth: SynthConfig,
    pub ingest: ColumnMapping,
    pub filter: FilterConfig,
    pub split: SplitConfig,
    pub ga: GaConfig,
    pub cloning: CloningConfig,
    pub ddpg: DdpgConfig,
    pub ddqn: DdqnConfig,
    pub ppo: PpoConfig,
    pub report: ReportConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::preset(Preset::Paper)
    }
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        let paper = Self {
            kinematics: KinematicsConfig::default(),
            reward: RewardConfig::default(),
            synth: SynthConfig::default(),
            ingest: ColumnMapping::default(),
            filter: FilterConfig::default(),
            split: SplitConfig::default(),
            ga: GaConfig::default(),
            cloning: CloningConfig::default(),
            ddpg: DdpgConfig::default(),
            ddqn: DdqnConfig::default(),
            ppo: PpoConfig::default(),
            report: ReportConfig::default(),
        };
        match preset {
            Preset::Paper => paper,
            Preset::Desk => Self {
                synth: SynthConfig {
                    n_events: 60,
                    ..paper.synth
                },
                ga: GaConfig {
                    population: 50,
                    max_generations: 40,
                    stall_generations: 40,
                    ..paper.ga
                },
                cloning: CloningConfig {
                    epochs: 8,
                    sample_stride: 5,
                    hidden: 16,
                    ..paper.cloning
                },
                ddpg: DdpgConfig {
                    batch_size: 64,
                    training_start: 2_000,
                    buffer_size: 50_000,
                    total_steps: 20_000,
                    reward_scale: 0.1,
                    ..paper.ddpg
                },
                // a shorter horizon and less exploration keep the gaps between
                // models resolvable within a short budget
                ddqn: DdqnConfig {
                    lr: 1e-3,
                    gamma: 0.9,
                    eps_final: 0.05,
                    batch_size: 64,
                    training_start: 2_000,
                    buffer_size: 50_000,
                    total_steps: 100_000,
                    reward_scale: 0.1,
                    ..paper.ddqn
                },
                ppo: PpoConfig {
                    step_per_collect: 2_000,
                    minibatch: 500,
                    total_steps: 50_000,
                    reward_scale: 0.1,
                    ..paper.ppo
                },
                ..paper
            },
        }
    }

    /// Applies the keys of `text` on top of `self`.
    pub fn overlay_toml(self, text: &str) -> Result<Self, ConfigError> {
        let parse = |e: &dyn std::fmt::Display| ConfigError::Parse(e.to_string());
        let patch: toml::Table = text.parse().map_err(|e| parse(&e))?;
        let mut base = toml::Table::try_from(&self).map_err(|e| parse(&e))?;
        merge(&mut base, patch);
        toml::Value::Table(base).try_into().map_err(|e| parse(&e))
    }

    pub fn load(preset: Preset, path: Option<&Path>) -> Result<Self, ConfigError> {
        let cfg = Self::preset(preset);
        match path {
            None => Ok(cfg),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                    path: p.display().to_string(),
                    source,
                })?;
                cfg.overlay_toml(&text)
            }
        }
    }

    /// Seeds every stochastic component from one number, each with its own
    /// offset so the streams differ.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.synth.seed = seed;
        self.split.seed = seed.wrapping_add(1);
        self.ga.seed = seed.wrapping_add(2);
        self.cloning.seed = seed.wrapping_add(3);
        self.ddpg.seed = seed.wrapping_add(4);
        self.ddqn.seed = seed.wrapping_add(5);
        self.ppo.seed = seed.wrapping_add(6);
        self
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        toml::to_string_pretty(self).map_err(|e| ConfigError::Parse(e.to_string()))
    }
}

fn merge(base: &mut toml::Table, patch: toml::Table) {
    for (k, v) in patch {
        match (base.get_mut(&k), v) {
            // a different model tag replaces the whole parameter table
            (Some(toml::Value::Table(b)), toml::Value::Table(p)) if !p.contains_key("model") || b.get("model") == p.get("model") => {
                merge(b, p)
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
