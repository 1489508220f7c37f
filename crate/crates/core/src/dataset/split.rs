use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::StrokeQuality;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

fn class_buckets(labels: &[StrokeQuality], rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    StrokeQuality::ALL
        .iter()
        .map(|&q| {
            let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == q).collect();
            idx.shuffle(rng);
            idx
        })
        .collect()
}

/// Stratified k-fold split. Members of each class are shuffled, then dealt
/// round-robin across folds with the dealing position carried over between
/// classes so fold sizes differ by at most one.
pub fn stratified_kfold(labels: &[StrokeQuality], k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::Config(format!("k-fold needs k >= 2, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let buckets = class_buckets(labels, &mut rng);
    for (q, b) in StrokeQuality::ALL.iter().zip(&buckets) {
        if b.len() < k {
            return Err(Error::TooFewSamples(format!(
                "class {q} has {} members, fewer than k = {k}",
                b.len()
            )));
        }
    }
    let mut val: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut pos = 0;
    for bucket in &buckets {
        for &i in bucket {
            val[pos % k].push(i);
            pos += 1;
        }
    }
    Ok(val
        .into_iter()
        .map(|mut v| {
            v.sort_unstable();
            let train = (0..labels.len()).filter(|i| v.binary_search(i).is_err()).collect();
            Fold { train, validation: v }
        })
        .collect())
}

/// Stratified single split: `round(fraction · n_c)` members of each class go
/// to the held-out side (at least one per class, never all of a class).
pub fn stratified_holdout(labels: &[StrokeQuality], fraction: f64, seed: u64) -> Result<Fold> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "holdout fraction must be in (0, 1), got {fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let buckets = class_buckets(labels, &mut rng);
    let mut train = Vec::new();
    let mut held = Vec::new();
    for (q, bucket) in StrokeQuality::ALL.iter().zip(&buckets) {
        if bucket.len() < 2 {
            return Err(Error::TooFewSamples(format!("class {q} has fewer than 2 members")));
        }
        let n_held = ((fraction * bucket.len() as f64).round() as usize).clamp(1, bucket.len() - 1);
        held.extend_from_slice(&bucket[..n_held]);
        train.extend_from_slice(&bucket[n_held..]);
    }
    train.sort_unstable();
    held.sort_unstable();
    Ok(Fold {
        train,
        validation: held,
    })
}
