//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use motioncf::dataset::{Dataset, MotionSample, SynthConfig};
use motioncf::harness::{train_bundle, DataSource, ExperimentConfig};
use motioncf::models::ModelBundle;

/// A reduced experiment that trains in a few seconds.
pub fn small_config(n_per_class: usize, n_eval: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        data: DataSource::Synthetic(SynthConfig {
            n_per_class,
            ..SynthConfig::default()
        }),
        n_eval,
        ..ExperimentConfig::default()
    };
    cfg.autoencoder.train.epochs = 30;
    cfg.classifier.train.epochs = 30;
    cfg
}

pub fn trained(cfg: &ExperimentConfig) -> (Dataset, ModelBundle) {
    let ds = cfg.load_dataset().unwrap();
    let bundle = train_bundle(cfg, &ds).unwrap();
    (ds, bundle)
}

/// Normalised samples on the training (`true`) or held-out side of the bundle.
pub fn side(ds: &Dataset, bundle: &ModelBundle, train: bool) -> Vec<MotionSample> {
    ds.samples
        .iter()
        .filter(|s| bundle.normalization.fitted_on.contains(&s.id) == train)
        .map(|s| bundle.normalization.apply(s).unwrap())
        .collect()
}
