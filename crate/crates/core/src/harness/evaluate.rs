use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{derive_seed, ExperimentConfig};
use super::table::{emit_table, BenchmarkTable, TableFormat, TableRow};
use crate::cfengine::{batch_explain, CFResult, Method};
use crate::dataset::{stratified_holdout, Dataset, Fold, MotionSample, Normalization};
use crate::error::{Error, Result};
use crate::metrics::{
    dtw, fit_outlier_models, frechet_distance, plausibility_scores, proximity, Direction, FrechetMode, MetricReport,
    Norm, OutlierModels,
};
use crate::models::{argmax, reconstruction_rmse, train_autoencoder, train_classifier, ModelBundle};

/// Metric columns of the evaluation, in table order.
pub const CF_METRICS: [(&str, &str, Direction); 10] = [
    ("validity", "Validity", Direction::HigherBetter),
    ("l1", "L1", Direction::LowerBetter),
    ("l2", "L2", Direction::LowerBetter),
    ("linf", "Linf", Direction::LowerBetter),
    ("dtw", "DTW", Direction::LowerBetter),
    ("lof", "LOF", Direction::LowerBetter),
    ("iforest", "IF", Direction::LowerBetter),
    ("ocsvm", "OCSVM", Direction::LowerBetter),
    ("fpd", "FPD", Direction::LowerBetter),
    ("fmd", "FMD", Direction::LowerBetter),
];

/// Stratified training / evaluation-pool split used by `train` and `evaluate`.
pub fn holdout_split(cfg: &ExperimentConfig, dataset: &Dataset) -> Result<Fold> {
    stratified_holdout(&dataset.labels()?, cfg.eval_fraction, derive_seed(cfg.seed, "holdout"))
}

/// Trains the autoencoder and classifier on the training side of the
/// holdout split. The bundle's normalisation records the training ids.
pub fn train_bundle(cfg: &ExperimentConfig, dataset: &Dataset) -> Result<ModelBundle> {
    cfg.validate()?;
    let split = holdout_split(cfg, dataset)?;
    let raw: Vec<MotionSample> = split.train.iter().map(|&i| dataset.samples[i].clone()).collect();
    let norm = Normalization::fit(&raw)?;
    let train: Vec<MotionSample> = raw.iter().map(|s| norm.apply(s)).collect::<Result<_>>()?;

    let mut chp = cfg.classifier;
    chp.train.seed = derive_seed(cfg.seed, "classifier");
    let mut ahp = cfg.autoencoder;
    ahp.train.seed = derive_seed(cfg.seed, "autoencoder");
    let (classifier, autoencoder) = rayon::join(
        || train_classifier(&train, None, &chp),
        || train_autoencoder(&train, None, &ahp),
    );
    let (classifier, ctrace) = classifier?;
    let (autoencoder, atrace) = autoencoder?;
    let rmse = reconstruction_rmse(&autoencoder, &train)?;

    let mut manifest = BTreeMap::new();
    manifest.insert("seed".to_string(), cfg.seed.to_string());
    manifest.insert("fold".to_string(), "holdout".to_string());
    manifest.insert("eval_fraction".to_string(), cfg.eval_fraction.to_string());
    manifest.insert("train_samples".to_string(), train.len().to_string());
    manifest.insert("classifier_hp".to_string(), json(&chp));
    manifest.insert("autoencoder_hp".to_string(), json(&ahp));
    manifest.insert("classifier_final_loss".to_string(), last(&ctrace.train_loss));
    manifest.insert("autoencoder_final_loss".to_string(), last(&atrace.train_loss));
    manifest.insert("autoencoder_train_rmse".to_string(), rmse.to_string());
    ModelBundle::new(autoencoder, classifier, norm, dataset.schema.clone(), manifest)
}

fn last(v: &[f64]) -> String {
    v.last().map(|x| x.to_string()).unwrap_or_default()
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serialises")
}

/// Result of the counterfactual evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfEvaluation {
    pub table: BenchmarkTable,
    /// One report per method, in `Method::ALL` order.
    pub reports: Vec<(Method, MetricReport)>,
    /// Evaluated instance ids in evaluation order.
    pub instances: Vec<String>,
}

struct Pools {
    train: Vec<MotionSample>,
    eval: Vec<MotionSample>,
}

fn pools(bundle: &ModelBundle, dataset: &Dataset) -> Result<Pools> {
    let train_ids: HashSet<&str> = bundle.normalization.fitted_on.iter().map(String::as_str).collect();
    let mut train = Vec::new();
    let mut eval = Vec::new();
    for s in &dataset.samples {
        let n = bundle.normalization.apply(s)?;
        if train_ids.contains(s.id.as_str()) {
            train.push(n);
        } else {
            eval.push(n);
        }
    }
    if train.len() != train_ids.len() {
        return Err(Error::Hygiene(format!(
            "bundle was trained on {} samples but only {} are in this dataset",
            train_ids.len(),
            train.len()
        )));
    }
    Ok(Pools { train, eval })
}

fn assert_disjoint(a: &[MotionSample], b: &[MotionSample], what: &str) -> Result<()> {
    let ids: HashSet<&str> = a.iter().map(|s| s.id.as_str()).collect();
    if let Some(s) = b.iter().find(|s| ids.contains(s.id.as_str())) {
        return Err(Error::Hygiene(format!("sample `{}` appears in both {what}", s.id)));
    }
    Ok(())
}

fn instance_metrics(
    x: &MotionSample,
    r: &CFResult,
    bundle: &ModelBundle,
    outliers: &OutlierModels,
) -> Result<Vec<f64>> {
    let y = &r.counterfactual;
    let hit = argmax(bundle.classifier.predict_proba(y)?) == r.target;
    let p = plausibility_scores(y.as_slice(), outliers)?;
    Ok(vec![
        if hit { 1.0 } else { 0.0 },
        proximity(&x.frames, y, Norm::L1)?,
        proximity(&x.frames, y, Norm::L2)?,
        proximity(&x.frames, y, Norm::Linf)?,
        dtw(&x.frames, y)?,
        p.lof,
        p.iforest,
        p.ocsvm,
        frechet_distance(&x.frames, y, FrechetMode::Pose)?,
        frechet_distance(&x.frames, y, FrechetMode::Motion)?,
    ])
}

/// Draws `n_eval` evaluation-pool instances currently predicted as the
/// non-target class, explains each with every method and scores them.
pub fn run_cf_evaluation(cfg: &ExperimentConfig, bundle: &ModelBundle, dataset: &Dataset) -> Result<CfEvaluation> {
    cfg.validate()?;
    let target = cfg.cf.target;
    let Pools { train, eval } = pools(bundle, dataset)?;

    let frames: Vec<_> = eval.iter().map(|s| s.frames.clone()).collect();
    let preds = bundle.classifier.predict_proba_batch(&frames)?;
    let mut candidates: Vec<MotionSample> = eval
        .into_iter()
        .zip(preds)
        .filter(|(_, p)| argmax(*p) != target)
        .map(|(s, _)| s)
        .collect();
    if candidates.len() < cfg.n_eval {
        return Err(Error::TooFewSamples(format!(
            "evaluation pool has {} instances predicted as `{}`, n_eval is {}",
            candidates.len(),
            target.opposite(),
            cfg.n_eval
        )));
    }
    candidates.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "instances")));
    candidates.truncate(cfg.n_eval);
    let selected = candidates;

    let outlier_ref: Vec<MotionSample> = train.iter().filter(|s| s.label == Some(target)).cloned().collect();
    assert_disjoint(&train, &selected, "the evaluation instances and the 1NN reference pool")?;
    assert_disjoint(
        &outlier_ref,
        &selected,
        "the evaluation instances and the outlier-model training set",
    )?;
    let mut ocfg = cfg.outlier;
    ocfg.seed = derive_seed(cfg.seed, "outlier");
    let outliers = fit_outlier_models(&outlier_ref, &ocfg)?;

    let metric_names: Vec<(String, Direction)> = CF_METRICS.iter().map(|(k, _, d)| (k.to_string(), *d)).collect();
    let mut reports = Vec::new();
    for method in Method::ALL {
        let explained = batch_explain(
            &selected,
            method,
            &cfg.cf,
            &bundle.autoencoder,
            &bundle.classifier,
            &train,
        );
        let scored: Vec<(String, Result<Vec<f64>>)> = selected
            .par_iter()
            .zip(explained)
            .map(|(x, e)| {
                let values = e.result.and_then(|r| instance_metrics(x, &r, bundle, &outliers));
                (e.id, values)
            })
            .collect();
        let mut report = MetricReport::new(metric_names.clone());
        for (id, values) in scored {
            match values {
                Ok(v) => report.push(id, v)?,
                Err(e) => report.push_failure(id, e.to_string()),
            }
        }
        reports.push((method, report));
    }

    let rows = CF_METRICS
        .iter()
        .map(|(key, label, dir)| TableRow {
            metric: label.to_string(),
            direction: *dir,
            cells: reports
                .iter()
                .map(|(_, r)| r.aggregate(key).filter(|a| a.n > 0))
                .collect(),
        })
        .collect();
    Ok(CfEvaluation {
        table: BenchmarkTable {
            columns: Method::ALL.iter().map(|m| m.as_str().to_string()).collect(),
            rows,
        },
        reports,
        instances: selected.iter().map(|s| s.id.clone()).collect(),
    })
}

impl CfEvaluation {
    /// One row per (instance, method) with every metric, round-trip precision.
    pub fn per_instance_csv(&self) -> String {
        let mut out = String::from("instance_id,method");
        for (k, _, _) in CF_METRICS {
            out.push(',');
            out.push_str(k);
        }
        out.push('\n');
        for (m, r) in &self.reports {
            for (id, values) in &r.instances {
                out.push_str(&format!("{id},{m}"));
                for v in values {
                    out.push_str(&format!(",{v}"));
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn failures_csv(&self) -> String {
        let mut out = String::from("instance_id,method,error\n");
        for (m, r) in &self.reports {
            for (id, msg) in &r.failures {
                out.push_str(&format!("{id},{m},\"{}\"\n", msg.replace('"', "\"\"")));
            }
        }
        out
    }

    /// Full-precision mean, SD and count per (method, metric); the rounded
    /// tables are rendered from these.
    pub fn aggregates_csv(&self) -> String {
        let mut out = String::from("method,metric,mean,sd,n\n");
        for (m, r) in &self.reports {
            for (metric, _, a) in r.aggregates() {
                out.push_str(&format!("{m},{metric},{},{},{}\n", a.mean, a.sd, a.n));
            }
        }
        out
    }

    /// Writes `per_instance.csv`, `aggregates.csv`, `failures.csv`,
    /// `table.md` and `table.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, text) in [
            ("per_instance.csv", self.per_instance_csv()),
            ("aggregates.csv", self.aggregates_csv()),
            ("failures.csv", self.failures_csv()),
            ("table.md", emit_table(&self.table, TableFormat::Markdown)),
            ("table.csv", emit_table(&self.table, TableFormat::Csv)),
        ] {
            let p = dir.join(name);
            fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}
