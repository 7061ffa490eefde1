//! Run configuration, read from TOML.
//!
//! Every key is optional; the defaults are those of [`RunConfig::default`].
//! Relative paths are resolved against the directory of the config file.
//!
//! ```toml
//! seed = 0                      # global seed, fanned out per stage
//! workers = 0                   # 0 = all available cores
//!
//! [paths]
//! log = "log.csv"               # input CSV
//! work_dir = "work"             # artifacts, reports and the manifest
//!
//! [preprocess]
//! quantile = 0.9                # trace-length quantile for cutting
//! train_fraction = 0.7          # temporal split
//! outcome_activity = "..."      # optional, cut traces before it
//! [preprocess.columns]          # CSV column names
//! case_id = "case_id"
//! activity = "activity"
//! timestamp = "timestamp"
//! label = "label"
//!
//! [mining]
//! support = 1.0
//! max_card = 3                  # largest n for Existence/Absence/Exactly
//! desired_label = 1
//!
//! [vae]
//! epochs = 30
//! batch_size = 32
//! learning_rate = 0.001
//! clip_norm = 5.0
//! hidden = 32
//! latent = 8
//! weights = { nll = 1.0, kl = 1.0, dtc = 1.0 }
//!
//! [classifier]
//! epochs = 30
//! batch_size = 32
//! learning_rate = 0.001
//! clip_norm = 5.0
//! hidden = 32
//!
//! [cf]
//! lambda_hinge = 1.0
//! lambda_dist = 0.05
//! lambda_dlc = 1.0              # REVISED+ only
//! beta = 1.0
//! alpha = 0.05
//! p = 0.5
//! max_iter = 500
//!
//! [evaluate]
//! k = 5                         # neighbours for y-NN
//! log_name = "..."              # row label, defaults to the log file stem
//! ```

use std::path::{Path, PathBuf};

use cfproc_core::counterfactual::CfConfig;
use cfproc_core::event_log::CsvSchema;
use cfproc_core::neural::{LossWeights, TrainConfig};
use cfproc_core::Error;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub workers: usize,
    pub paths: Paths,
    pub preprocess: Preprocess,
    pub mining: Mining,
    pub vae: VaeSection,
    pub classifier: ClassifierSection,
    pub cf: CfSection,
    pub evaluate: Evaluate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub log: PathBuf,
    pub work_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Preprocess {
    pub quantile: f64,
    pub train_fraction: f64,
    pub outcome_activity: Option<String>,
    pub columns: CsvSchema,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Mining {
    pub support: f64,
    pub max_card: u32,
    pub desired_label: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VaeSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub clip_norm: f64,
    pub hidden: usize,
    pub latent: usize,
    pub weights: LossWeights,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub clip_norm: f64,
    pub hidden: usize,
}

/// Search settings; the desired label comes from `[mining]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CfSection {
    pub lambda_hinge: f64,
    pub lambda_dist: f64,
    pub lambda_dlc: f64,
    pub beta: f64,
    pub alpha: f64,
    pub p: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Evaluate {
    pub k: usize,
    pub log_name: Option<String>,
}

impl Default for Paths {
    fn default() -> Self {
        Paths { log: PathBuf::from("log.csv"), work_dir: PathBuf::from("work") }
    }
}

impl Default for Preprocess {
    fn default() -> Self {
        Preprocess { quantile: 0.9, train_fraction: 0.7, outcome_activity: None, columns: CsvSchema::default() }
    }
}

impl Default for Mining {
    fn default() -> Self {
        Mining { support: 1.0, max_card: 3, desired_label: 1 }
    }
}

impl Default for VaeSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        VaeSection {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            clip_norm: t.clip_norm,
            hidden: 32,
            latent: 8,
            weights: LossWeights::default(),
        }
    }
}

impl Default for ClassifierSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        ClassifierSection {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            clip_norm: t.clip_norm,
            hidden: 32,
        }
    }
}

impl Default for CfSection {
    fn default() -> Self {
        let c = CfConfig::default();
        CfSection {
            lambda_hinge: c.lambda_hinge,
            lambda_dist: c.lambda_dist,
            lambda_dlc: c.lambda_dlc,
            beta: c.beta,
            alpha: c.alpha,
            p: c.p,
            max_iter: c.max_iter,
        }
    }
}

impl Default for Evaluate {
    fn default() -> Self {
        Evaluate { k: 5, log_name: None }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, Error> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Argument(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        let mut cfg = RunConfig::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.paths.log = resolve(base, &cfg.paths.log);
        cfg.paths.work_dir = resolve(base, &cfg.paths.work_dir);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let p = &self.preprocess;
        if !(p.quantile > 0.0 && p.quantile <= 1.0) {
            return Err(Error::Argument(format!("preprocess.quantile must lie in (0, 1], got {}", p.quantile)));
        }
        if !(p.train_fraction > 0.0 && p.train_fraction < 1.0) {
            return Err(Error::Argument(format!(
                "preprocess.train_fraction must lie in (0, 1), got {}",
                p.train_fraction
            )));
        }
        if !(self.mining.support > 0.0 && self.mining.support <= 1.0) {
            return Err(Error::Argument(format!("mining.support must lie in (0, 1], got {}", self.mining.support)));
        }
        if self.mining.desired_label > 1 {
            return Err(Error::Argument("mining.desired_label must be 0 or 1".into()));
        }
        if self.vae.hidden == 0 || self.classifier.hidden == 0 || self.vae.latent == 0 {
            return Err(Error::Argument("hidden and latent sizes must be positive".into()));
        }
        if self.evaluate.k == 0 {
            return Err(Error::Argument("evaluate.k must be positive".into()));
        }
        self.vae_train(0, true).validate()?;
        self.classifier_train(0).validate()?;
        self.cf_config().validate()
    }

    pub fn vae_train(&self, seed: u64, with_dtc: bool) -> TrainConfig {
        let v = &self.vae;
        let mut weights = v.weights;
        if !with_dtc {
            weights.dtc = 0.0;
        }
        TrainConfig {
            epochs: v.epochs,
            batch_size: v.batch_size,
            learning_rate: v.learning_rate,
            seed,
            clip_norm: v.clip_norm,
            weights,
        }
    }

    pub fn classifier_train(&self, seed: u64) -> TrainConfig {
        let c = &self.classifier;
        TrainConfig {
            epochs: c.epochs,
            batch_size: c.batch_size,
            learning_rate: c.learning_rate,
            seed,
            clip_norm: c.clip_norm,
            weights: LossWeights::default(),
        }
    }

    pub fn cf_config(&self) -> CfConfig {
        let c = &self.cf;
        CfConfig {
            lambda_hinge: c.lambda_hinge,
            lambda_dist: c.lambda_dist,
            lambda_dlc: c.lambda_dlc,
            beta: c.beta,
            alpha: c.alpha,
            p: c.p,
            max_iter: c.max_iter,
            desired_label: self.mining.desired_label,
        }
    }

    pub fn log_name(&self) -> String {
        self.evaluate.log_name.clone().unwrap_or_else(|| {
            self.paths.log.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "log".into())
        })
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
