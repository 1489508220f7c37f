//! Classification scores and counterfactual quality metrics: validity,
//! proximity, DTW closeness, outlier-based plausibility and Fréchet
//! pose/motion distances, plus mean (SD) aggregation.

mod classification;
mod distance;
mod frechet;
mod outlier;

use serde::{Deserialize, Serialize};

pub use classification::{classification_scores, ClassificationScores};
pub(crate) use distance::vector_norm;
pub use distance::{dtw, proximity, Norm};
pub use frechet::{fit_gaussian, frechet_distance, frechet_gaussian, FrechetMode, COVARIANCE_EPS};
pub use outlier::{
    average_path_length, fit_outlier_models, fit_outlier_points, plausibility_scores, project_capped_simplex,
    Calibration, IsolationForest, Lof, OneClassSvm, OutlierConfig, OutlierModels, Plausibility,
};

use crate::cfengine::CFResult;
use crate::dataset::StrokeQuality;
use crate::error::{Error, Result};
use crate::models::{argmax, Classifier};

/// Fraction of counterfactuals whose recomputed prediction is `target`.
pub fn validity(results: &[CFResult], classifier: &Classifier, target: StrokeQuality) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::TooFewSamples("validity of an empty batch".into()));
    }
    let mut hits = 0usize;
    for r in results {
        if argmax(classifier.predict_proba(&r.counterfactual)?) == target {
            hits += 1;
        }
    }
    Ok(hits as f64 / results.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

impl Direction {
    pub fn arrow(self) -> &'static str {
        match self {
            Direction::HigherBetter => "↑",
            Direction::LowerBetter => "↓",
        }
    }
}

/// Mean and sample standard deviation (n − 1 denominator; 0 for a single value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

pub fn aggregate(values: &[f64]) -> Aggregate {
    let n = values.len();
    if n == 0 {
        return Aggregate {
            mean: f64::NAN,
            sd: f64::NAN,
            n,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Aggregate { mean, sd, n }
}

/// Per-instance metric values for one method, with the metric directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metrics: Vec<(String, Direction)>,
    /// `(instance id, values aligned with metrics)`
    pub instances: Vec<(String, Vec<f64>)>,
    /// `(instance id, error message)`; excluded from aggregates.
    pub failures: Vec<(String, String)>,
}

impl MetricReport {
    pub fn new(metrics: Vec<(String, Direction)>) -> Self {
        MetricReport {
            metrics,
            instances: Vec::new(),
            failures: Vec::new(),
        }
    }

    pub fn push(&mut self, id: impl Into<String>, values: Vec<f64>) -> Result<()> {
        if values.len() != self.metrics.len() {
            return Err(Error::shape("MetricReport::push", self.metrics.len(), values.len()));
        }
        self.instances.push((id.into(), values));
        Ok(())
    }

    pub fn push_failure(&mut self, id: impl Into<String>, message: impl Into<String>) {
        self.failures.push((id.into(), message.into()));
    }

    pub fn column(&self, metric: &str) -> Option<Vec<f64>> {
        let i = self.metrics.iter().position(|(m, _)| m == metric)?;
        Some(self.instances.iter().map(|(_, v)| v[i]).collect())
    }

    pub fn aggregate(&self, metric: &str) -> Option<Aggregate> {
        self.column(metric).map(|v| aggregate(&v))
    }

    pub fn aggregates(&self) -> Vec<(String, Direction, Aggregate)> {
        self.metrics
            .iter()
            .map(|(m, d)| (m.clone(), *d, self.aggregate(m).expect("own metric")))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_sample_sd() {
        let a = aggregate(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(a.mean, 2.5);
        assert!((a.sd - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(aggregate(&[7.0]).sd, 0.0);
    }

    #[test]
    fn report_columns() {
        let mut r = MetricReport::new(vec![
            ("l1".into(), Direction::LowerBetter),
            ("validity".into(), Direction::HigherBetter),
        ]);
        r.push("a", vec![1.0, 1.0]).unwrap();
        r.push("b", vec![3.0, 0.0]).unwrap();
        assert!(r.push("c", vec![1.0]).is_err());
        assert_eq!(r.aggregate("l1").unwrap().mean, 2.0);
        assert_eq!(r.aggregate("validity").unwrap().mean, 0.5);
        assert!(r.aggregate("dtw").is_none());
    }
}
