//! Metric behaviour on trained models and synthetic reference sets.

mod common;

use motioncf::cfengine::{CFResult, Method};
use motioncf::dataset::{generate_synthetic, Normalization, StrokeQuality, SynthConfig};
use motioncf::metrics::{fit_outlier_models, plausibility_scores, validity, OutlierConfig};
use motioncf::models::argmax;
use proptest::prelude::*;
use std::sync::OnceLock;

fn as_result(frames: motioncf::Frames, target: StrokeQuality) -> CFResult {
    CFResult {
        method: Method::Latent,
        target,
        counterfactual: frames,
        valid: true,
        iterations: 0,
        final_prob: 0.0,
        loss_trace: Vec::new(),
        neighbor_id: None,
    }
}

#[test]
fn validity_counts_target_predictions() {
    let mut cfg = common::small_config(40, 1);
    cfg.autoencoder.train.epochs = 1;
    let (ds, bundle) = common::trained(&cfg);
    let c = &bundle.classifier;
    let samples = common::side(&ds, &bundle, false);
    let mut hits = Vec::new();
    let mut misses = Vec::new();
    for s in samples {
        if argmax(c.predict_proba(&s.frames).unwrap()) == StrokeQuality::Good {
            hits.push(as_result(s.frames, StrokeQuality::Good));
        } else {
            misses.push(as_result(s.frames, StrokeQuality::Good));
        }
    }
    assert!(hits.len() >= 3 && !misses.is_empty());
    let mixed: Vec<CFResult> = hits[..3].iter().cloned().chain([misses[0].clone()]).collect();
    assert_eq!(validity(&mixed, c, StrokeQuality::Good).unwrap(), 0.75);
    assert_eq!(validity(&hits, c, StrokeQuality::Good).unwrap(), 1.0);
    assert_eq!(validity(&misses, c, StrokeQuality::Good).unwrap(), 0.0);
}

struct Reference {
    points: Vec<Vec<f64>>,
    models: motioncf::metrics::OutlierModels,
}

fn reference() -> &'static Reference {
    static R: OnceLock<Reference> = OnceLock::new();
    R.get_or_init(|| {
        let ds = generate_synthetic(&SynthConfig {
            n_per_class: 60,
            ..SynthConfig::default()
        })
        .unwrap();
        let norm = Normalization::fit(&ds.samples).unwrap();
        let good: Vec<_> = ds
            .samples
            .iter()
            .filter(|s| s.label == Some(StrokeQuality::Good))
            .map(|s| norm.apply(s).unwrap())
            .collect();
        let models = fit_outlier_models(
            &good,
            &OutlierConfig {
                seed: 3,
                ..Default::default()
            },
        )
        .unwrap();
        Reference {
            points: good.iter().map(|s| s.frames.as_slice().to_vec()).collect(),
            models,
        }
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn reference_members_score_at_most_reference_median() {
    let r = reference();
    let m = &r.models;
    // calibrated scores the reference set was fitted on: leave-one-out LOF,
    // in-sample isolation depth and SVM margin
    let lof_ref: Vec<f64> = m
        .lof
        .reference_scores()
        .iter()
        .map(|&s| m.calibration[0].apply(s))
        .collect();
    let if_ref: Vec<f64> = r
        .points
        .iter()
        .map(|p| m.calibration[1].apply(m.iforest.score(p)))
        .collect();
    let svm_ref: Vec<f64> = r
        .points
        .iter()
        .map(|p| m.calibration[2].apply(m.ocsvm.score(p)))
        .collect();
    let queried: Vec<_> = r.points.iter().map(|p| plausibility_scores(p, m).unwrap()).collect();
    for (i, q) in queried.iter().enumerate() {
        assert_eq!(q.iforest, if_ref[i]);
        assert_eq!(q.ocsvm, svm_ref[i]);
    }
    assert!(median(queried.iter().map(|q| q.lof).collect()) <= median(lof_ref));
    assert!(median(queried.iter().map(|q| q.iforest).collect()) <= median(if_ref));
    assert!(median(queried.iter().map(|q| q.ocsvm).collect()) <= median(svm_ref));
}

#[test]
fn extreme_outlier_scores_near_one() {
    let r = reference();
    let n = r.points.len() as f64;
    let dim = r.points[0].len();
    let x: Vec<f64> = (0..dim)
        .map(|j| {
            let mean = r.points.iter().map(|p| p[j]).sum::<f64>() / n;
            let var = r.points.iter().map(|p| (p[j] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            mean + 100.0 * var.sqrt()
        })
        .collect();
    let s = plausibility_scores(&x, &r.models).unwrap();
    assert!(s.lof >= 0.99 && s.iforest >= 0.99 && s.ocsvm >= 0.99, "{s:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn plausibility_is_clamped(scale in -1e3f64..1e3, offset in -10f64..10.0, seed in 0usize..120) {
        let r = reference();
        let base = &r.points[seed % r.points.len()];
        let x: Vec<f64> = base.iter().enumerate().map(|(i, v)| v * scale + offset * ((i % 7) as f64 - 3.0)).collect();
        let s = plausibility_scores(&x, &r.models).unwrap();
        for v in [s.lof, s.iforest, s.ocsvm] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
