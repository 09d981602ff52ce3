//! Training run configuration: TOML with documented keys; unknown keys are
//! hard errors.

use crate::error::{CliError, Result};
use data_io::Split;
use resnet_stacks::{preset, ModelConfig};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Cifar10,
    Mnist,
    Synth,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub kind: DatasetKind,
    /// Directory holding the dataset files (cifar10/mnist).
    pub path: Option<PathBuf>,
    #[serde(default = "default_classes")]
    pub classes: usize,
    #[serde(default = "default_size")]
    pub size: usize,
    #[serde(default = "default_train_n")]
    pub train_n: usize,
    #[serde(default = "default_test_n")]
    pub test_n: usize,
    /// Per-channel mean/std normalization (CIFAR constants), off by default.
    #[serde(default)]
    pub normalize: bool,
    /// Random crop (pad 4) + horizontal flip on the train split, off by
    /// default.
    #[serde(default)]
    pub augment: bool,
}

fn default_classes() -> usize {
    4
}
fn default_size() -> usize {
    16
}
fn default_train_n() -> usize {
    2000
}
fn default_test_n() -> usize {
    400
}

impl DatasetSection {
    pub fn channels(&self) -> usize {
        match self.kind {
            DatasetKind::Mnist => 1,
            _ => 3,
        }
    }

    pub fn class_count(&self) -> usize {
        match self.kind {
            DatasetKind::Synth => self.classes,
            _ => 10,
        }
    }

    /// Seed convention: the test split of a synthetic dataset uses seed+1.
    pub fn synth_seed(&self, run_seed: u64, split: Split) -> u64 {
        match split {
            Split::Train => run_seed,
            Split::Test => run_seed.wrapping_add(1),
        }
    }
}

/// Either a preset name or a full inline model description.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ModelSection {
    Preset { preset: String },
    Inline(ModelConfig),
}

impl ModelSection {
    pub fn resolve(&self) -> Result<ModelConfig> {
        match self {
            ModelSection::Preset { preset: name } => preset(name).ok_or_else(|| {
                CliError::runtime(format!(
                    "unknown model preset `{name}`; valid presets: {}",
                    resnet_stacks::PRESET_NAMES.join(", ")
                ))
            }),
            ModelSection::Inline(cfg) => Ok(cfg.clone()),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
}

fn default_lr() -> f64 {
    0.05
}
fn default_momentum() -> f64 {
    0.9
}
fn default_weight_decay() -> f64 {
    5e-4
}

impl Default for OptimizerSection {
    fn default() -> Self {
        Self {
            lr: default_lr(),
            momentum: default_momentum(),
            weight_decay: default_weight_decay(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Constant,
    Step,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub kind: ScheduleKind,
    #[serde(default = "default_every")]
    pub every: usize,
    #[serde(default = "default_factor")]
    pub factor: f64,
}

fn default_every() -> usize {
    2
}
fn default_factor() -> f64 {
    0.1
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self {
            kind: ScheduleKind::Constant,
            every: default_every(),
            factor: default_factor(),
        }
    }
}

impl ScheduleSection {
    /// Learning rate for a 1-based epoch index.
    pub fn lr_at(&self, base_lr: f64, epoch: usize) -> f64 {
        match self.kind {
            ScheduleKind::Constant => base_lr,
            ScheduleKind::Step => base_lr * self.factor.powi(((epoch - 1) / self.every) as i32),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// When set, metric rows record wall_s = 0 so identical seeds produce
    /// bitwise-identical CSV files.
    #[serde(default)]
    pub deterministic_timing: bool,
    pub dataset: DatasetSection,
    pub model: ModelSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub schedule: ScheduleSection,
}

fn default_seed() -> u64 {
    42
}
fn default_epochs() -> usize {
    5
}
fn default_batch_size() -> usize {
    64
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("runs/default")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::runtime(format!("cannot read config {}: {e}", path.display()))
        })?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::runtime(format!("config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::runtime(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(CliError::runtime("epochs must be at least 1"));
        }
        if self.batch_size < 1 {
            return Err(CliError::runtime("batch_size must be at least 1"));
        }
        if !(self.optimizer.lr > 0.0) {
            return Err(CliError::runtime("optimizer.lr must be positive"));
        }
        if matches!(self.dataset.kind, DatasetKind::Cifar10 | DatasetKind::Mnist)
            && self.dataset.path.is_none()
        {
            return Err(CliError::runtime(
                "dataset.path is required for file-backed datasets",
            ));
        }
        if self.dataset.kind == DatasetKind::Synth && self.dataset.classes < 2 {
            return Err(CliError::runtime("dataset.classes must be at least 2"));
        }
        Ok(())
    }

    /// The model description with its seed pinned to the run seed.
    pub fn model_config(&self) -> Result<ModelConfig> {
        let mut cfg = self.model.resolve()?;
        cfg.seed = self.seed;
        Ok(cfg)
    }
}
