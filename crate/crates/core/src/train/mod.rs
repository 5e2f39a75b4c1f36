//! Optimization: momentum SGD with step decay, weight decay, clipping and augmentation.

mod data;
mod optim;
mod run;

pub use data::{
    augment, load_dataset, transform_coordinates, read_manifest, write_manifest, DatasetManifest, Example, ManifestEntry, Split,
};
pub use optim::{
    clip_global_norm, evaluate, metrics_from_scores, momentum_update, train_step, Metrics, Optimizer, PreparedExample,
    StepOutcome,
};
pub use run::{derive_rng, make_batches, prepare_examples, train, EpochRecord, TrainReport};

use crate::error::{Error, Result};
use crate::net::{parse_bool, parse_key_values, parse_ratio, ModelConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub momentum: f64,
    pub lr0: f64,
    pub lr_decay: f64,
    pub lr_decay_every: usize,
    pub lr_min: f64,
    pub l2: f64,
    pub grad_clip_norm: f64,
    pub batch_size: usize,
    /// Largest atom count per batch; a protein that would exceed it waits for the next batch.
    pub atom_budget: usize,
    pub epochs: usize,
    pub coord_noise_sigma: f64,
    pub axis_scale_range: (f64, f64),
    pub augment: bool,
    pub feature_noise_sigma: f64,
    pub noise_every_conv: bool,
    pub atom_feature_dropout_p: f64,
    pub class_weighting: bool,
    pub seed: u64,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            momentum: 0.98,
            lr0: 0.001,
            lr_decay: 0.5,
            lr_decay_every: 50,
            lr_min: 1e-6,
            l2: 0.001,
            grad_clip_norm: 10.0,
            batch_size: 8,
            atom_budget: 100_000,
            epochs: 600,
            coord_noise_sigma: 0.1,
            axis_scale_range: (0.9, 1.1),
            augment: true,
            feature_noise_sigma: 0.025,
            noise_every_conv: true,
            atom_feature_dropout_p: 0.05,
            class_weighting: false,
            seed: 0,
            workers: 0,
        }
    }
}

/// `max(lr_min, lr0 * lr_decay^floor(epoch / lr_decay_every))`.
pub fn lr_at(config: &TrainConfig, epoch: usize) -> f64 {
    let k = (epoch / config.lr_decay_every.max(1)) as i32;
    (config.lr0 * config.lr_decay.powi(k)).max(config.lr_min)
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        for (k, v) in [
            ("lr0", self.lr0),
            ("lr_decay", self.lr_decay),
            ("lr_min", self.lr_min),
            ("grad_clip_norm", self.grad_clip_norm),
        ] {
            if v.is_nan() || v <= 0.0 {
                return bad(format!("{k} must be positive: {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must lie in [0, 1): {}", self.momentum));
        }
        for (k, v) in [
            ("l2", self.l2),
            ("coord_noise_sigma", self.coord_noise_sigma),
            ("feature_noise_sigma", self.feature_noise_sigma),
        ] {
            if v.is_nan() || v < 0.0 {
                return bad(format!("{k} must be non-negative: {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.atom_feature_dropout_p) {
            return bad(format!("atom_feature_dropout_p must lie in [0, 1): {}", self.atom_feature_dropout_p));
        }
        let (lo, hi) = self.axis_scale_range;
        if !(lo > 0.0 && lo <= hi) {
            return bad(format!("axis_scale_range must satisfy 0 < lo <= hi: {lo},{hi}"));
        }
        if self.batch_size < 1 || self.lr_decay_every < 1 || self.atom_budget < 1 {
            return bad("batch_size, lr_decay_every and atom_budget must be at least 1".into());
        }
        Ok(())
    }

    /// Applies one `key = value` setting; returns false for keys this config does not own.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        fn num<V: std::str::FromStr>(key: &str, value: &str) -> Result<V> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
        }
        match key {
            "momentum" => self.momentum = num(key, value)?,
            "lr0" => self.lr0 = num(key, value)?,
            "lr_decay" => self.lr_decay = num(key, value)?,
            "lr_decay_every" => self.lr_decay_every = num(key, value)?,
            "lr_min" => self.lr_min = num(key, value)?,
            "l2" => self.l2 = num(key, value)?,
            "grad_clip_norm" => self.grad_clip_norm = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "atom_budget" => self.atom_budget = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "coord_noise_sigma" => self.coord_noise_sigma = num(key, value)?,
            "axis_scale_range" => {
                let (a, b) = value
                    .split_once(',')
                    .ok_or_else(|| Error::Config(format!("`{key}` expects `lo,hi`, got `{value}`")))?;
                self.axis_scale_range = (parse_ratio(key, a.trim())?, parse_ratio(key, b.trim())?);
            }
            "augment" => self.augment = parse_bool(key, value)?,
            "feature_noise_sigma" => self.feature_noise_sigma = num(key, value)?,
            "noise_every_conv" => self.noise_every_conv = parse_bool(key, value)?,
            "atom_feature_dropout_p" => self.atom_feature_dropout_p = num(key, value)?,
            "class_weighting" => self.class_weighting = parse_bool(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "workers" => self.workers = num(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn to_text(&self) -> String {
        [
            ("momentum", self.momentum.to_string()),
            ("lr0", self.lr0.to_string()),
            ("lr_decay", self.lr_decay.to_string()),
            ("lr_decay_every", self.lr_decay_every.to_string()),
            ("lr_min", self.lr_min.to_string()),
            ("l2", self.l2.to_string()),
            ("grad_clip_norm", self.grad_clip_norm.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("atom_budget", self.atom_budget.to_string()),
            ("epochs", self.epochs.to_string()),
            ("coord_noise_sigma", self.coord_noise_sigma.to_string()),
            ("axis_scale_range", format!("{},{}", self.axis_scale_range.0, self.axis_scale_range.1)),
            ("augment", self.augment.to_string()),
            ("feature_noise_sigma", self.feature_noise_sigma.to_string()),
            ("noise_every_conv", self.noise_every_conv.to_string()),
            ("atom_feature_dropout_p", self.atom_feature_dropout_p.to_string()),
            ("class_weighting", self.class_weighting.to_string()),
            ("seed", self.seed.to_string()),
            ("workers", self.workers.to_string()),
        ]
        .iter()
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
    }
}

/// Model and training settings read from one `key = value` file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if self.model.set(key, value)? || self.train.set(key, value)? {
            Ok(())
        } else {
            Err(Error::Config(format!("unknown key `{key}`")))
        }
    }

    /// Applies every setting of `text` on top of `self`.
    pub fn overlay(&mut self, text: &str) -> Result<()> {
        for (k, v) in parse_key_values(text)? {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.overlay(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()
    }

    pub fn to_text(&self) -> String {
        format!("{}{}", self.model.to_text(), self.train.to_text())
    }
}
