use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{derive_seed, splitmix, ExperimentConfig};
use super::table::{BenchmarkTable, TableRow};
use crate::dataset::{augment, stratified_kfold, Dataset, MotionSample, Normalization, StrokeQuality};
use crate::error::{Error, Result};
use crate::metrics::{aggregate, classification_scores, ClassificationScores, Direction};
use crate::models::{train_classifier, ClassifierHp, MajorityBaseline};

pub const CV_MODELS: [&str; 3] = ["conv1d", "mlp", "baseline"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub fold: usize,
    pub model: String,
    pub scores: ClassificationScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub table: BenchmarkTable,
    /// Fold-major, models in `CV_MODELS` order.
    pub folds: Vec<FoldScore>,
}

impl CvReport {
    /// One row per (fold, model), values in round-trip precision.
    pub fn fold_csv(&self) -> String {
        let mut out = String::from("fold,model,accuracy,balanced_accuracy,f1\n");
        for f in &self.folds {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                f.fold, f.model, f.scores.accuracy, f.scores.balanced_accuracy, f.scores.f1
            ));
        }
        out
    }
}

fn run_fold(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    fold: usize,
    train: &[usize],
    val: &[usize],
) -> Result<Vec<FoldScore>> {
    let raw_train: Vec<MotionSample> = train.iter().map(|&i| ds.samples[i].clone()).collect();
    let norm = Normalization::fit(&raw_train)?;
    let mut train_set = Vec::with_capacity(2 * raw_train.len());
    let aug_seed = derive_seed(cfg.seed, &format!("augment/{fold}"));
    for (i, s) in raw_train.iter().enumerate() {
        let s = norm.apply(s)?;
        let mut copy = augment(&s, &cfg.augment, splitmix(aug_seed ^ i as u64))?;
        copy.id.push_str("#aug");
        train_set.push(s);
        train_set.push(copy);
    }
    let val_set: Vec<MotionSample> = val.iter().map(|&i| norm.apply(&ds.samples[i])).collect::<Result<_>>()?;
    let truth: Vec<StrokeQuality> = val_set.iter().map(|s| s.label.expect("labelled dataset")).collect();
    let frames: Vec<_> = val_set.iter().map(|s| s.frames.clone()).collect();

    let mut out = Vec::with_capacity(CV_MODELS.len());
    for (name, hp) in [("conv1d", &cfg.classifier), ("mlp", &cfg.mlp)] {
        let hp = ClassifierHp {
            train: crate::models::TrainHp {
                seed: derive_seed(cfg.seed, &format!("{name}/{fold}")),
                ..hp.train
            },
            ..*hp
        };
        let (model, _) = train_classifier(&train_set, None, &hp)?;
        let preds: Vec<StrokeQuality> = model
            .predict_proba_batch(&frames)?
            .into_iter()
            .map(crate::models::argmax)
            .collect();
        out.push(FoldScore {
            fold,
            model: name.into(),
            scores: classification_scores(&preds, &truth)?,
        });
    }
    let train_labels: Vec<StrokeQuality> = train_set.iter().map(|s| s.label.expect("labelled dataset")).collect();
    let baseline = MajorityBaseline::fit(&train_labels);
    out.push(FoldScore {
        fold,
        model: "baseline".into(),
        scores: classification_scores(&vec![baseline.predict(); truth.len()], &truth)?,
    });
    Ok(out)
}

/// Stratified k-fold benchmark of the conv1d classifier, the MLP and the
/// majority baseline. Training splits are augmented with one copy per sample.
pub fn run_cv_benchmark(cfg: &ExperimentConfig, dataset: &Dataset) -> Result<CvReport> {
    cfg.validate()?;
    let labels = dataset.labels()?;
    let folds = stratified_kfold(&labels, cfg.folds, derive_seed(cfg.seed, "folds"))?;
    let per_fold: Vec<Vec<FoldScore>> = folds
        .par_iter()
        .enumerate()
        .map(|(k, f)| {
            run_fold(cfg, dataset, k, &f.train, &f.validation).map_err(|e| Error::InFold {
                fold: k,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let folds: Vec<FoldScore> = per_fold.into_iter().flatten().collect();

    type Getter = fn(&ClassificationScores) -> f64;
    let metric_rows: [(&str, Getter); 3] = [
        ("Accuracy", |s| s.accuracy),
        ("Balanced accuracy", |s| s.balanced_accuracy),
        ("F1", |s| s.f1),
    ];
    let rows = metric_rows
        .iter()
        .map(|(name, get)| TableRow {
            metric: name.to_string(),
            direction: Direction::HigherBetter,
            cells: CV_MODELS
                .iter()
                .map(|m| {
                    let v: Vec<f64> = folds.iter().filter(|f| f.model == *m).map(|f| get(&f.scores)).collect();
                    Some(aggregate(&v))
                })
                .collect(),
        })
        .collect();
    Ok(CvReport {
        table: BenchmarkTable {
            columns: CV_MODELS.iter().map(|s| s.to_string()).collect(),
            rows,
        },
        folds,
    })
}
