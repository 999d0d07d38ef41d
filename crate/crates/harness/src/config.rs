//! Experiment configuration.
//!
//! A config is a TOML table; command-line flags override individual keys.
//! Per-run manifests embed the config under `[config]`, so a manifest can be
//! fed back through `--config` to reproduce its run.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use robust_bandits::adversary::{AttackKind, AttackSpec, DEFAULT_BETA, DEFAULT_P};
use robust_bandits::algorithms::DEFAULT_DELTA;
use robust_bandits::robust_stats::{DEFAULT_C_HIGHDIM, DEFAULT_C_UNIVARIATE};

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Setting {
    Linear,
    Glm,
    Contextual,
}

impl Setting {
    pub fn name(self) -> &'static str {
        match self {
            Setting::Linear => "linear",
            Setting::Glm => "glm",
            Setting::Contextual => "contextual",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Rclb,
    NonrobustPe,
    SingleAgentPe,
    ItwEstimates,
    CleanObservations,
    Rcglm,
    Suplinucb,
    SuplinucbNonrobust,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::Rclb,
        Algorithm::NonrobustPe,
        Algorithm::SingleAgentPe,
        Algorithm::ItwEstimates,
        Algorithm::CleanObservations,
        Algorithm::Rcglm,
        Algorithm::Suplinucb,
        Algorithm::SuplinucbNonrobust,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Rclb => "rclb",
            Algorithm::NonrobustPe => "nonrobust-pe",
            Algorithm::SingleAgentPe => "single-agent-pe",
            Algorithm::ItwEstimates => "itw-estimates",
            Algorithm::CleanObservations => "clean-observations",
            Algorithm::Rcglm => "rcglm",
            Algorithm::Suplinucb => "suplinucb",
            Algorithm::SuplinucbNonrobust => "suplinucb-nonrobust",
        }
    }

    pub fn setting(self) -> Setting {
        match self {
            Algorithm::Rcglm => Setting::Glm,
            Algorithm::Suplinucb | Algorithm::SuplinucbNonrobust => Setting::Contextual,
            _ => Setting::Linear,
        }
    }
}

impl FromStr for Algorithm {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    pub kind: String,
    pub p: f64,
    pub beta: f64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self { kind: AttackKind::None.name().to_string(), p: DEFAULT_P, beta: DEFAULT_BETA }
    }
}

impl AttackConfig {
    pub fn to_spec(&self) -> Result<AttackSpec, HarnessError> {
        let kind: AttackKind = self.kind.parse()?;
        Ok(match kind {
            AttackKind::None => AttackSpec::none(),
            AttackKind::ThresholdBias => AttackSpec::threshold(self.p, self.beta),
            AttackKind::ContextualThreshold => AttackSpec::contextual_threshold(self.p, self.beta),
            AttackKind::ModelPoison => AttackSpec::model_poison(),
            AttackKind::Custom => {
                return Err(HarnessError::Config("custom attacks need a code hook and cannot come from a config file".into()))
            }
        })
    }
}

/// Optional sweep axes; each missing axis uses the scalar value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxes {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub setting: Setting,
    pub algorithm: Algorithm,
    pub d: usize,
    pub k: usize,
    pub m: usize,
    pub horizon: u64,
    pub alpha: f64,
    pub delta: f64,
    pub c_univariate: f64,
    pub c_highdim: f64,
    /// Link for the GLM setting.
    pub link: String,
    /// Instance generator for the linear and GLM settings.
    pub instance_style: String,
    pub attack: AttackConfig,
    pub seeds: Vec<u64>,
    pub sweep: SweepAxes,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            setting: Setting::Linear,
            algorithm: Algorithm::Rclb,
            d: 5,
            k: 50,
            m: 100,
            horizon: 100_000,
            alpha: 0.1,
            delta: DEFAULT_DELTA,
            c_univariate: DEFAULT_C_UNIVARIATE,
            c_highdim: DEFAULT_C_HIGHDIM,
            link: "logistic".into(),
            instance_style: "uniform-cube".into(),
            attack: AttackConfig::default(),
            seeds: (0..20).collect(),
            sweep: SweepAxes::default(),
            output: PathBuf::from("runs"),
        }
    }
}

#[derive(Debug, Deserialize)]
struct ManifestShape {
    config: ExperimentConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let value: toml::Table = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        let parsed = if value.contains_key("config") {
            toml::from_str::<ManifestShape>(text).map(|m| m.config)
        } else {
            toml::from_str::<ExperimentConfig>(text)
        };
        parsed.map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Reads a config file or a run manifest.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(path.display().to_string(), e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.algorithm.setting() != self.setting {
            return Err(HarnessError::Config(format!(
                "algorithm {} does not run in the {} setting",
                self.algorithm.name(),
                self.setting.name()
            )));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("seeds must be non-empty".into()));
        }
        if self.d == 0 || self.k == 0 || self.m == 0 || self.horizon == 0 {
            return Err(HarnessError::Config("d, k, m and horizon must be positive".into()));
        }
        if let Some(ms) = &self.sweep.m {
            if ms.is_empty() || ms.contains(&0) {
                return Err(HarnessError::Config("sweep.m must list positive agent counts".into()));
            }
        }
        if let Some(alphas) = &self.sweep.alpha {
            if alphas.is_empty() {
                return Err(HarnessError::Config("sweep.alpha must not be empty".into()));
            }
        }
        self.attack.to_spec()?;
        if self.setting == Setting::Glm {
            self.link.parse::<robust_bandits::env::LinkKind>()?;
        }
        if self.setting != Setting::Contextual {
            self.instance_style.parse::<robust_bandits::env::InstanceStyle>()?;
        }
        Ok(())
    }

    /// The `(M, α)` grid, M-major.
    pub fn sweep_points(&self) -> Vec<(usize, f64)> {
        let ms = self.sweep.m.clone().unwrap_or_else(|| vec![self.m]);
        let alphas = self.sweep.alpha.clone().unwrap_or_else(|| vec![self.alpha]);
        ms.iter().flat_map(|&m| alphas.iter().map(move |&a| (m, a))).collect()
    }

    /// This config narrowed to one sweep point and one seed.
    pub fn single_run(&self, m: usize, alpha: f64, seed: u64) -> ExperimentConfig {
        ExperimentConfig { m, alpha, seeds: vec![seed], sweep: SweepAxes::default(), ..self.clone() }
    }
}

/// Parses `"0..20"`, `"3"` or `"1,4,9"`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, HarnessError> {
    let bad = || HarnessError::Config(format!("cannot parse seeds {s:?}"));
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        return Ok((a..b).collect());
    }
    s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect()
}

pub fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>, HarnessError> {
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| HarnessError::Config(format!("cannot parse list item {x:?}"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_defaults_round_trip() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn test_partial_file_uses_defaults() {
        let cfg = ExperimentConfig::from_toml("m = 40\nseeds = [1, 2]\n[attack]\nkind = \"threshold-bias\"\nbeta = 2.0\n").unwrap();
        assert_eq!(cfg.m, 40);
        assert_eq!(cfg.d, 5);
        assert_eq!(cfg.attack.kind, "threshold-bias");
        assert_eq!((cfg.attack.p, cfg.attack.beta), (DEFAULT_P, 2.0));
        cfg.validate().unwrap();
    }

    #[test]
    fn test_incompatible_algorithm() {
        let cfg = ExperimentConfig { algorithm: Algorithm::Suplinucb, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig { seeds: vec![], ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn test_unknown_key_rejected() {
        assert!(ExperimentConfig::from_toml("bogus = 1\n").is_err());
    }

    #[test]
    fn test_sweep_points() {
        let cfg = ExperimentConfig {
            sweep: SweepAxes { m: Some(vec![20, 40]), alpha: Some(vec![0.1, 0.2]) },
            ..Default::default()
        };
        assert_eq!(cfg.sweep_points(), vec![(20, 0.1), (20, 0.2), (40, 0.1), (40, 0.2)]);
        assert_eq!(ExperimentConfig::default().sweep_points(), vec![(100, 0.1)]);
    }

    #[test]
    fn test_parse_seeds() {
        assert_eq!(parse_seeds("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("4, 7").unwrap(), vec![4, 7]);
        assert!(parse_seeds("x").is_err());
    }
}
