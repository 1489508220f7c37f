use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cfengine::CFParams;
use crate::dataset::{generate_synthetic, load_motion_file, AugmentPolicy, Dataset, LoadOptions, SynthConfig};
use crate::error::{Error, Result};
use crate::metrics::OutlierConfig;
use crate::models::{AutoencoderHp, ClassifierArch, ClassifierHp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(SynthConfig),
    File {
        path: PathBuf,
        /// Resample every sample to this many frames.
        #[serde(default)]
        frames: Option<usize>,
    },
}

/// Everything a run depends on. Per-model training seeds are derived from
/// `seed`, so the `seed` fields inside the nested hyperparameters are
/// overwritten when a pipeline runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub data: DataSource,
    pub folds: usize,
    /// Fraction of each class held out as the counterfactual evaluation pool.
    pub eval_fraction: f64,
    pub n_eval: usize,
    pub augment: AugmentPolicy,
    pub classifier: ClassifierHp,
    pub mlp: ClassifierHp,
    pub autoencoder: AutoencoderHp,
    pub cf: CFParams,
    pub outlier: OutlierConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 7,
            out_dir: PathBuf::from("out"),
            data: DataSource::Synthetic(SynthConfig {
                n_per_class: 250,
                ..SynthConfig::default()
            }),
            folds: 5,
            eval_fraction: 0.5,
            n_eval: 100,
            augment: AugmentPolicy::default(),
            classifier: ClassifierHp::default(),
            mlp: ClassifierHp {
                arch: ClassifierArch::Mlp,
                width: 32,
                ..ClassifierHp::default()
            },
            autoencoder: AutoencoderHp::default(),
            cf: CFParams::default(),
            outlier: OutlierConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Parses a possibly partial config. Keys are merged onto
    /// [`ExperimentConfig::default`] table by table, so an omitted key keeps
    /// the experiment default rather than its type's default. A `[data]`
    /// table of another `kind` replaces the default source. Without an
    /// explicit `data.seed` the generator follows the master seed.
    pub fn from_toml(text: &str) -> Result<Self> {
        let user: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut merged = toml::Table::try_from(Self::default()).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut merged, &user);
        let mut cfg: ExperimentConfig = merged
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let data_seed = user.get("data").and_then(|d| d.get("seed")).is_some();
        if let (false, DataSource::Synthetic(s)) = (data_seed, &mut cfg.data) {
            s.seed = cfg.seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Sets the master seed, and the generator seed for synthetic data.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        if let DataSource::Synthetic(s) = &mut self.data {
            s.seed = seed;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Config(format!("folds must be at least 2, got {}", self.folds)));
        }
        if !(self.eval_fraction > 0.0 && self.eval_fraction < 1.0) {
            return Err(Error::Config(format!(
                "eval_fraction must lie in (0, 1), got {}",
                self.eval_fraction
            )));
        }
        if self.n_eval == 0 {
            return Err(Error::Config("n_eval must be positive".into()));
        }
        if let DataSource::Synthetic(s) = &self.data {
            s.validate()?;
        }
        self.augment.validate()?;
        self.classifier.train.validate()?;
        self.mlp.train.validate()?;
        self.autoencoder.train.validate()?;
        self.cf.validate()
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        match &self.data {
            DataSource::Synthetic(s) => generate_synthetic(s),
            DataSource::File { path, frames } => load_motion_file(path, &LoadOptions { frames: *frames }),
        }
    }
}

fn merge(base: &mut toml::Table, user: &toml::Table) {
    for (key, value) in user {
        match (base.get_mut(key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u))
                if b.get("kind") == u.get("kind") || u.get("kind").is_none() =>
            {
                merge(b, u)
            }
            _ => {
                base.insert(key.clone(), value.clone());
            }
        }
    }
}

/// Seed for one named stage of a run (splitmix64 over the master seed and tag).
pub fn derive_seed(master: u64, tag: &str) -> u64 {
    let mut h = master ^ 0x9e37_79b9_7f4a_7c15;
    for b in tag.bytes() {
        h = splitmix(h ^ b as u64);
    }
    splitmix(h)
}

pub(crate) fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
