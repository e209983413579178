use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::Scale;
use crate::losses::LossWeights;
use crate::networks::{DiscriminatorSpec, GeneratorSpec};

/// Overrides `checkpoint_dir` when set.
pub const CHECKPOINT_DIR_ENV: &str = "EDGESR_CHECKPOINT_DIR";

/// Every training knob, read from a flat TOML document. Missing keys take
/// their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub scale: Scale,
    pub hr_size: usize,
    pub batch_size: usize,
    pub lr_initial: f64,
    pub lr_fine: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub canny_sigma: f64,
    pub degrade_sigma: f64,
    pub d_to_g_lr_ratio: f64,
    pub plateau_window: usize,
    pub plateau_min_improvement: f64,
    pub plateau_patience: usize,
    pub max_steps: usize,
    pub seed: u64,
    pub random_crop: bool,

    pub generator_width: usize,
    pub discriminator_width: usize,
    pub spectral_norm: bool,

    pub lambda_g1: f64,
    pub lambda_fm: f64,
    pub lambda_l1: f64,
    pub lambda_g2: f64,
    pub lambda_p: f64,
    pub lambda_s: f64,

    /// Steps between checkpoints; 0 saves only at the end.
    pub checkpoint_interval: usize,
    pub checkpoint_dir: PathBuf,
    pub extractor_weights: Option<PathBuf>,
    pub log_path: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let w = LossWeights::default();
        Self {
            scale: Scale::X4,
            hr_size: 512,
            batch_size: 8,
            lr_initial: 1e-4,
            lr_fine: 1e-5,
            adam_beta1: 0.0,
            adam_beta2: 0.9,
            adam_eps: 1e-8,
            canny_sigma: 2.0,
            degrade_sigma: 1.0,
            d_to_g_lr_ratio: 0.1,
            plateau_window: 1000,
            plateau_min_improvement: 0.01,
            plateau_patience: 5000,
            max_steps: 2000,
            seed: 0,
            random_crop: true,
            generator_width: 64,
            discriminator_width: 64,
            spectral_norm: true,
            lambda_g1: w.lambda_g1,
            lambda_fm: w.lambda_fm,
            lambda_l1: w.lambda_l1,
            lambda_g2: w.lambda_g2,
            lambda_p: w.lambda_p,
            lambda_s: w.lambda_s,
            checkpoint_interval: 1000,
            checkpoint_dir: PathBuf::from("checkpoints"),
            extractor_weights: None,
            log_path: None,
        }
    }
}

fn cfg_err(msg: String) -> Error {
    Error::Config(msg)
}

impl TrainConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| cfg_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => cfg_err(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| cfg_err(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.scale.factor();
        if self.batch_size == 0 {
            return Err(cfg_err("batch_size must be at least 1".into()));
        }
        if self.hr_size == 0 || !self.hr_size.is_multiple_of(s) || !self.hr_size.is_multiple_of(4) {
            return Err(cfg_err(format!(
                "hr_size {} must be a positive multiple of 4 and of the scale {s}",
                self.hr_size
            )));
        }
        if !(self.lr_initial > 0.0 && self.lr_fine > 0.0 && self.lr_fine < self.lr_initial) {
            return Err(cfg_err(format!(
                "need 0 < lr_fine < lr_initial, got {} and {}",
                self.lr_fine, self.lr_initial
            )));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(cfg_err(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.adam_eps > 0.0) {
            return Err(cfg_err("adam_eps must be positive".into()));
        }
        if !(self.canny_sigma >= 0.0 && self.degrade_sigma >= 0.0) {
            return Err(cfg_err("blur widths must be non-negative".into()));
        }
        if !(self.d_to_g_lr_ratio > 0.0) {
            return Err(cfg_err("d_to_g_lr_ratio must be positive".into()));
        }
        if self.plateau_window == 0 {
            return Err(cfg_err("plateau_window must be at least 1".into()));
        }
        if self.generator_width < 2 || !self.generator_width.is_multiple_of(2) {
            return Err(cfg_err("generator_width must be an even number".into()));
        }
        if self.discriminator_width == 0 {
            return Err(cfg_err("discriminator_width must be positive".into()));
        }
        self.loss_weights().validate().map_err(|e| cfg_err(e.to_string()))
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            lambda_g1: self.lambda_g1,
            lambda_fm: self.lambda_fm,
            lambda_l1: self.lambda_l1,
            lambda_g2: self.lambda_g2,
            lambda_p: self.lambda_p,
            lambda_s: self.lambda_s,
        }
    }

    pub fn edge_generator(&self) -> GeneratorSpec {
        GeneratorSpec {
            use_spectral_norm: self.spectral_norm,
            ..GeneratorSpec::edge().with_width(self.generator_width)
        }
    }

    pub fn completion_generator(&self) -> GeneratorSpec {
        GeneratorSpec {
            use_spectral_norm: self.spectral_norm,
            ..GeneratorSpec::completion().with_width(self.generator_width)
        }
    }

    pub fn edge_discriminator(&self) -> DiscriminatorSpec {
        DiscriminatorSpec {
            use_spectral_norm: self.spectral_norm,
            ..DiscriminatorSpec::edge().with_width(self.discriminator_width)
        }
    }

    pub fn completion_discriminator(&self) -> DiscriminatorSpec {
        DiscriminatorSpec {
            use_spectral_norm: self.spectral_norm,
            ..DiscriminatorSpec::completion().with_width(self.discriminator_width)
        }
    }

    /// `checkpoint_dir`, unless the environment overrides it.
    pub fn resolved_checkpoint_dir(&self) -> PathBuf {
        match std::env::var_os(CHECKPOINT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.checkpoint_dir.clone(),
        }
    }
}
