//! Experiment configuration files (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exploration::StrategyKind;
use crate::grounding::CemConfig;
use crate::tasks::{Family, Scale, Split};
use crate::workflow::DEFAULT_CANDIDATE_POOL;

/// Seeds used when a config lists none.
pub const DEFAULT_SEEDS: [u64; 5] = [50, 100, 150, 500, 1000];
pub const DEFAULT_REAL_DAMPING: f64 = 0.8;
pub const DEFAULT_PROXY_DAMPING: f64 = 0.7;
pub const DEFAULT_DR_SAMPLES: usize = 10;

fn default_scale() -> Scale {
    Scale::Desk
}
fn default_seeds() -> Vec<u64> {
    DEFAULT_SEEDS.to_vec()
}
fn default_real_damping() -> f64 {
    DEFAULT_REAL_DAMPING
}
fn one() -> f64 {
    1.0
}

/// Loop settings; unset fields fall back to 10 rounds of 50 actions and a 1000-candidate pool.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IplwSettings {
    pub rounds: Option<usize>,
    pub actions_per_round: Option<usize>,
    pub min_residual: Option<f64>,
    pub candidate_pool: Option<usize>,
}

impl IplwSettings {
    pub fn rounds(&self) -> usize {
        self.rounds.unwrap_or(10)
    }
    pub fn actions_per_round(&self) -> usize {
        self.actions_per_round.unwrap_or(50)
    }
    pub fn min_residual(&self) -> f64 {
        self.min_residual.unwrap_or(1e-3)
    }
    pub fn candidate_pool(&self) -> usize {
        self.candidate_pool.unwrap_or(DEFAULT_CANDIDATE_POOL)
    }
}

/// Overrides on top of the scale's CEM schedule.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CemSettings {
    pub rounds: Option<usize>,
    pub samples_per_round: Option<usize>,
    pub elite_count: Option<usize>,
    pub mean: Option<[f64; 3]>,
    pub std: Option<[f64; 3]>,
    pub max_observations: Option<usize>,
}

impl CemSettings {
    pub fn resolve(&self, family: Family, scale: Scale) -> CemConfig {
        let mut c = match scale {
            Scale::Full => CemConfig::full(family),
            Scale::Desk => CemConfig::desk(family),
        };
        if let Some(v) = self.rounds {
            c.rounds = v;
        }
        if let Some(v) = self.samples_per_round {
            c.samples_per_round = v;
        }
        if let Some(v) = self.elite_count {
            c.elite_count = v;
        }
        if let Some(v) = self.mean {
            c.mean = v;
        }
        if let Some(v) = self.std {
            c.std = v;
        }
        if self.max_observations.is_some() {
            c.max_observations = self.max_observations;
        }
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: Family,
    #[serde(default = "default_scale")]
    pub scale: Scale,
    pub strategies: Vec<StrategyKind>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_real_damping")]
    pub real_damping: f64,
    #[serde(default = "one")]
    pub sim_damping: f64,
    /// Performance surface file, required by the gradient strategy.
    pub surface: Option<PathBuf>,
    pub out: PathBuf,
    /// Split the transferred rankers are evaluated on.
    #[serde(default = "default_eval_split")]
    pub eval_split: Split,
    #[serde(default)]
    pub iplw: IplwSettings,
    #[serde(default)]
    pub cem: CemSettings,
}

fn default_eval_split() -> Split {
    Split::Test
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        // Relative paths in a config file are relative to the file.
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(s) = &cfg.surface {
            if s.is_relative() {
                cfg.surface = Some(base.join(s));
            }
        }
        if cfg.out.is_relative() {
            cfg.out = base.join(&cfg.out);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Checks everything that can be checked before any simulation.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.strategies.is_empty() {
            return bad("strategies must not be empty".into());
        }
        for (name, d) in [("real_damping", self.real_damping), ("sim_damping", self.sim_damping)] {
            if !(d > 0.0 && d <= 1.0) {
                return bad(format!("{name} must be in (0, 1], got {d}"));
            }
        }
        if self.strategies.contains(&StrategyKind::Gradient) {
            match &self.surface {
                None => return bad("the gradient strategy needs `surface`".into()),
                Some(p) if !p.is_file() => {
                    return bad(format!("surface file {} does not exist", p.display()))
                }
                _ => {}
            }
        }
        if self.iplw.rounds() == 0 || self.iplw.actions_per_round() == 0 {
            return bad("iplw rounds and actions_per_round must be positive".into());
        }
        if !(self.iplw.min_residual() > 0.0) {
            return bad("iplw min_residual must be positive".into());
        }
        self.cem.resolve(self.family, self.scale).validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::from_toml(
            "family = \"bowling\"\nstrategies = [\"mixed\"]\nout = \"runs\"\n",
        )
        .unwrap();
        assert_eq!(cfg.seeds, DEFAULT_SEEDS);
        assert_eq!(cfg.scale, Scale::Desk);
        assert_eq!(cfg.real_damping, 0.8);
        cfg.validate().unwrap();
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn gradient_without_surface_is_rejected() {
        let cfg = ExperimentConfig::from_toml(
            "family = \"bowling\"\nstrategies = [\"gradient\"]\nout = \"runs\"\n",
        )
        .unwrap();
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let r = ExperimentConfig::from_toml(
            "family = \"bowling\"\nstrategies = [\"mixed\"]\nout = \"r\"\ncolour = 1\n",
        );
        assert!(matches!(r, Err(Error::Parse(_))));
    }
}
