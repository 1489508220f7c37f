use serde::{Deserialize, Serialize};

use crate::dataset::StrokeQuality;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationScores {
    pub accuracy: f64,
    /// Mean of the per-class recalls.
    pub balanced_accuracy: f64,
    /// Macro-averaged over both classes.
    pub f1: f64,
    /// Classes absent from `labels`; their recall is counted as 0.
    pub undefined_recall: Vec<StrokeQuality>,
}

pub fn classification_scores(preds: &[StrokeQuality], labels: &[StrokeQuality]) -> Result<ClassificationScores> {
    if preds.len() != labels.len() {
        return Err(Error::shape("classification_scores", labels.len(), preds.len()));
    }
    if preds.is_empty() {
        return Err(Error::TooFewSamples("no predictions to score".into()));
    }
    // confusion[label][pred]
    let mut confusion = [[0usize; 2]; 2];
    for (p, l) in preds.iter().zip(labels) {
        confusion[l.index()][p.index()] += 1;
    }
    let n = preds.len() as f64;
    let accuracy = (confusion[0][0] + confusion[1][1]) as f64 / n;
    let mut undefined_recall = Vec::new();
    let mut recall_sum = 0.0;
    let mut f1_sum = 0.0;
    for class in StrokeQuality::ALL {
        let c = class.index();
        let tp = confusion[c][c];
        let fnn = confusion[c][1 - c];
        let fp = confusion[1 - c][c];
        if tp + fnn == 0 {
            undefined_recall.push(class);
        } else {
            recall_sum += tp as f64 / (tp + fnn) as f64;
        }
        let denom = 2 * tp + fp + fnn;
        if denom > 0 {
            f1_sum += 2.0 * tp as f64 / denom as f64;
        }
    }
    Ok(ClassificationScores {
        accuracy,
        balanced_accuracy: recall_sum / 2.0,
        f1: f1_sum / 2.0,
        undefined_recall,
    })
}
