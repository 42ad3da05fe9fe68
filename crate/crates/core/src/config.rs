//! Run configuration: TOML files plus dotted-key command-line overrides.
//! Unknown keys are rejected everywhere, and the effective merged config
//! can be re-serialized verbatim for the output directory.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config: {0}")]
    Parse(String),
    #[error("config override '{key}': {msg}")]
    Override { key: String, msg: String },
    #[error("config: {0}")]
    Invalid(String),
    #[error("config: io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Model hyperparameters. The per-view patch grid is `grid` x `grid` of
/// `patch` x `patch` pixels, so renders are (grid*patch)^2; widths and
/// head counts are free choices documented here rather than fixed by the
/// architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub grid: usize,
    pub patch: usize,
    pub dim: usize,
    pub lang_dim: usize,
    pub embed_dim: usize,
    pub heads: usize,
    pub ff_mult: usize,
    pub vocab: usize,
    pub max_tokens: usize,
    /// Per-axis resolution of the 3D decoding lattice.
    pub lattice: usize,
    pub conv_kernel: usize,
    /// Score back-projections with nearest-pixel lookups instead of
    /// bilinear sampling.
    pub nearest_backprojection: bool,
    /// Cross-entropy target smoothing; 0 keeps hard one-hot targets.
    pub label_smoothing: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            grid: 8,
            patch: 4,
            dim: 32,
            lang_dim: 32,
            embed_dim: 16,
            heads: 1,
            ff_mult: 2,
            vocab: 4096,
            max_tokens: 16,
            lattice: 24,
            conv_kernel: 3,
            nearest_backprojection: false,
            label_smoothing: 0.0,
        }
    }
}

impl ModelConfig {
    pub fn resolution(&self) -> usize {
        self.grid * self.patch
    }

    /// Tiny dimensions for gradient-check tests.
    pub fn micro() -> ModelConfig {
        ModelConfig {
            grid: 2,
            patch: 2,
            dim: 6,
            lang_dim: 8,
            embed_dim: 4,
            heads: 1,
            ff_mult: 2,
            vocab: 64,
            max_tokens: 10,
            lattice: 5,
            conv_kernel: 3,
            nearest_backprojection: false,
            label_smoothing: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.grid == 0 || self.patch == 0 {
            return Err(ConfigError::Invalid("grid and patch must be positive".into()));
        }
        if self.dim % self.heads != 0 {
            return Err(ConfigError::Invalid(format!(
                "dim {} not divisible by heads {}",
                self.dim, self.heads
            )));
        }
        if self.conv_kernel % 2 == 0 {
            return Err(ConfigError::Invalid("conv_kernel must be odd".into()));
        }
        if self.lattice < 2 {
            return Err(ConfigError::Invalid("lattice must be at least 2".into()));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err(ConfigError::Invalid("label_smoothing must be in [0,1)".into()));
        }
        Ok(())
    }
}

/// Which contrastive terms participate in the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Components {
    /// Behavior cloning only.
    None,
    /// State-language alignment only.
    Sl,
    /// Both contrastive terms.
    Both,
}

/// How the goal keyframe is chosen for a transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GoalSampling {
    /// The next keyframe of the episode.
    Next,
    /// Uniform over strictly later keyframes.
    Future,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    Adam,
    /// Adam direction rescaled per tensor by the layer-wise trust ratio,
    /// for large-batch runs.
    Lamb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub warmup_steps: usize,
    pub lambda: f64,
    pub tau: f64,
    pub augment: bool,
    pub optimizer: OptimizerKind,
    pub components: Components,
    pub goal_sampling: GoalSampling,
    pub eval_episodes: usize,
    /// Evaluate every this many steps (0 = only at the end).
    pub eval_every: usize,
    /// Keyframe budget per evaluation episode.
    pub max_eval_steps: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 800,
            batch_size: 8,
            base_lr: 3e-3,
            warmup_steps: 80,
            lambda: 0.5,
            tau: 0.1,
            augment: true,
            optimizer: OptimizerKind::Adam,
            components: Components::Both,
            goal_sampling: GoalSampling::Next,
            eval_episodes: 25,
            eval_every: 0,
            max_eval_steps: 6,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.batch_size == 0 {
            return Err(ConfigError::Invalid("batch_size must be >= 1".into()));
        }
        if self.steps == 0 || self.warmup_steps >= self.steps {
            return Err(ConfigError::Invalid(format!(
                "need warmup_steps < steps, got {} / {}",
                self.warmup_steps, self.steps
            )));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(ConfigError::Invalid(format!(
                "lambda {} outside [0,1]",
                self.lambda
            )));
        }
        if self.tau <= 0.0 {
            return Err(ConfigError::Invalid(format!("tau {} must be > 0", self.tau)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Demonstrations per task variant.
    pub n_per_task: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig { n_per_task: 10 }
    }
}

/// Sweep axes for ablation runs; one training run per listed value.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub lambda: Option<Vec<f64>>,
    pub batch_size: Option<Vec<usize>>,
    pub components: Option<Vec<Components>>,
}

impl SweepConfig {
    pub fn is_empty(&self) -> bool {
        self.lambda.is_none() && self.batch_size.is_none() && self.components.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub model: ModelConfig,
    pub data: DataConfig,
    pub train: TrainConfig,
    pub sweep: SweepConfig,
}

impl Config {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model.validate()?;
        self.train.validate()
    }

    /// Parse a TOML document, then apply dotted `key=value` overrides.
    /// Unknown keys anywhere are rejected before any compute starts.
    pub fn from_toml(text: &str, overrides: &[(String, String)]) -> Result<Config, ConfigError> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for (key, value) in overrides {
            apply_override(&mut table, key, value)?;
        }
        let merged = toml::to_string(&table).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let cfg: Config = toml::from_str(&merged).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(
        path: &std::path::Path,
        overrides: &[(String, String)],
    ) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Config::from_toml(&text, overrides)
    }

    /// The effective configuration as TOML, echoed into output
    /// directories so every run is reproducible from its artifacts.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// Set `a.b.c = value` inside a TOML table, parsing the value as TOML
/// (falling back to a bare string).
fn apply_override(table: &mut toml::Table, key: &str, value: &str) -> Result<(), ConfigError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Override {
            key: key.into(),
            msg: "empty path component".into(),
        });
    }
    let parsed: toml::Value = match value.parse::<toml::Value>() {
        Ok(v) => v,
        Err(_) => toml::Value::String(value.to_string()),
    };
    let mut cursor = table;
    for part in &parts[..parts.len() - 1] {
        cursor = cursor
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| ConfigError::Override {
                key: key.into(),
                msg: format!("'{}' is not a table", part),
            })?;
    }
    cursor.insert(parts[parts.len() - 1].to_string(), parsed);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        Config::default().validate().unwrap();
        ModelConfig::micro().validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        let res = Config::from_toml("[train]\nstepz = 10\n", &[]);
        assert!(res.is_err());
        let res = Config::from_toml("", &[("train.stepz".into(), "10".into())]);
        assert!(res.is_err());
    }

    #[test]
    fn overrides_apply_with_types() {
        let cfg = Config::from_toml(
            "[train]\nsteps = 100\n",
            &[
                ("train.lambda".into(), "0.25".into()),
                ("train.components".into(), "\"sl\"".into()),
                ("model.grid".into(), "4".into()),
            ],
        )
        .unwrap();
        assert_eq!(cfg.train.steps, 100);
        assert_eq!(cfg.train.lambda, 0.25);
        assert_eq!(cfg.train.components, Components::Sl);
        assert_eq!(cfg.model.grid, 4);
    }

    #[test]
    fn echo_roundtrips() {
        let cfg = Config::from_toml("[model]\ngrid = 6\n", &[]).unwrap();
        let echoed = cfg.to_toml();
        let back = Config::from_toml(&echoed, &[]).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn bad_lambda_rejected() {
        assert!(Config::from_toml("[train]\nlambda = 1.5\n", &[]).is_err());
    }

    #[test]
    fn bare_string_override_parses() {
        let cfg = Config::from_toml("", &[("train.components".into(), "sl".into())]).unwrap();
        assert_eq!(cfg.train.components, Components::Sl);
    }
}
