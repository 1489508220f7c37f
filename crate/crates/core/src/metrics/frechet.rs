use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dataset::Frames;
use crate::error::{Error, Result};

/// Diagonal shrinkage added to each fitted covariance.
pub const COVARIANCE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrechetMode {
    /// Per-frame pose vectors (FPD).
    Pose,
    /// Per-frame first differences (FMD).
    Motion,
}

/// Mean and covariance (population, plus `COVARIANCE_EPS · I`) of the rows.
pub fn fit_gaussian(features: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = features.nrows() as f64;
    let d = features.ncols();
    let mean = DVector::from_iterator(d, features.column_iter().map(|c| c.sum() / n));
    let mut centred = features.clone();
    for mut row in centred.row_iter_mut() {
        row -= mean.transpose();
    }
    let mut cov = centred.transpose() * &centred / n;
    for i in 0..d {
        cov[(i, i)] += COVARIANCE_EPS;
    }
    (mean, cov)
}

fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

fn trace_sqrt(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .sum()
}

/// `‖μ1 − μ2‖² + Tr(Σ1 + Σ2 − 2 (√Σ1 Σ2 √Σ1)^{1/2})`.
pub fn frechet_gaussian(mu1: &DVector<f64>, s1: &DMatrix<f64>, mu2: &DVector<f64>, s2: &DMatrix<f64>) -> Result<f64> {
    let d = mu1.len();
    if mu2.len() != d || s1.shape() != (d, d) || s2.shape() != (d, d) {
        return Err(Error::shape(
            "frechet",
            format!("dimension {d}"),
            format!("{} / {:?} / {:?}", mu2.len(), s1.shape(), s2.shape()),
        ));
    }
    let r1 = psd_sqrt(s1);
    let cross = trace_sqrt(&(&r1 * s2 * &r1));
    let value = (mu1 - mu2).norm_squared() + s1.trace() + s2.trace() - 2.0 * cross;
    Ok(value.max(0.0))
}

fn features(x: &Frames, mode: FrechetMode) -> DMatrix<f64> {
    let (t, d) = x.shape();
    match mode {
        FrechetMode::Pose => DMatrix::from_row_slice(t, d, x.as_slice()),
        FrechetMode::Motion => DMatrix::from_fn(t - 1, d, |i, c| x.get(i + 1, c) - x.get(i, c)),
    }
}

/// Fréchet distance between Gaussians fitted to the pose (or velocity)
/// features of two motions.
pub fn frechet_distance(x: &Frames, y: &Frames, mode: FrechetMode) -> Result<f64> {
    if x.num_frames() < 2 || y.num_frames() < 2 {
        return Err(Error::TooFewSamples("frechet distance needs at least 2 frames".into()));
    }
    if x.num_channels() != y.num_channels() {
        return Err(Error::shape("frechet", x.num_channels(), y.num_channels()));
    }
    let (m1, s1) = fit_gaussian(&features(x, mode));
    let (m2, s2) = fit_gaussian(&features(y, mode));
    frechet_gaussian(&m1, &s1, &m2, &s2)
}
