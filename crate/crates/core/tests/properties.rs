//! Property tests over metric and numerical invariants.

use motioncf::dataset::{Frames, MotionSample, Normalization, StrokeType};
use motioncf::metrics::{aggregate, dtw, frechet_distance, proximity, FrechetMode, Norm};
use motioncf::ndiff::{Graph, Tensor};
use proptest::prelude::*;

fn frames(max_t: usize, d: usize) -> impl Strategy<Value = Frames> {
    (1..=max_t).prop_flat_map(move |t| {
        prop::collection::vec(-5.0f64..5.0, t * d).prop_map(move |v| Frames::new(t, d, v).unwrap())
    })
}

fn pair(t: usize, d: usize) -> impl Strategy<Value = (Frames, Frames)> {
    let one = move || prop::collection::vec(-5.0f64..5.0, t * d).prop_map(move |v| Frames::new(t, d, v).unwrap());
    (one(), one())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn dtw_is_symmetric_and_zero_on_identity((a, b) in (1usize..5).prop_flat_map(|d| (frames(12, d), frames(12, d)))) {
        prop_assert_eq!(dtw(&a, &b).unwrap(), dtw(&b, &a).unwrap());
        prop_assert_eq!(dtw(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn dtw_is_bounded_by_the_diagonal_alignment((a, b) in (1usize..15, 1usize..5).prop_flat_map(|(t, d)| pair(t, d))) {
        let diagonal: f64 = a.rows().zip(b.rows())
            .map(|(p, q)| p.iter().zip(q).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
            .sum();
        prop_assert!(dtw(&a, &b).unwrap() <= diagonal + 1e-9);
    }

    #[test]
    fn norms_are_ordered((a, b) in (1usize..15, 1usize..5).prop_flat_map(|(t, d)| pair(t, d))) {
        let l1 = proximity(&a, &b, Norm::L1).unwrap();
        let l2 = proximity(&a, &b, Norm::L2).unwrap();
        let linf = proximity(&a, &b, Norm::Linf).unwrap();
        prop_assert!(linf <= l2 + 1e-12 && l2 <= l1 + 1e-12);
        prop_assert!(linf >= 0.0);
    }

    // enough frames for full-rank covariances; near-singular ones put the
    // matrix square root on eigenvalues at round-off level
    #[test]
    fn frechet_is_symmetric_and_non_negative((a, b) in (1usize..4).prop_flat_map(|d| (4 * d + 2..20).prop_flat_map(move |t| pair(t, d)))) {
        for mode in [FrechetMode::Pose, FrechetMode::Motion] {
            let ab = frechet_distance(&a, &b, mode).unwrap();
            let ba = frechet_distance(&b, &a, mode).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() <= 1e-9 * ab.max(1.0), "{} vs {}", ab, ba);
        }
    }

    #[test]
    fn softmax_rows_are_distributions(v in prop::collection::vec(-30.0f64..30.0, 6)) {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::new(vec![2, 3], v).unwrap());
        let p = g.softmax(x).unwrap();
        for row in g.value(p).data().chunks(3) {
            prop_assert!(row.iter().all(|&q| (0.0..=1.0).contains(&q)));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn normalisation_round_trips(data in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 8 * 3), 2..6)) {
        let samples: Vec<MotionSample> = data.into_iter().enumerate().map(|(i, v)| MotionSample {
            id: format!("s{i}"),
            stroke_type: StrokeType::ForehandClear,
            label: None,
            frames: Frames::new(8, 3, v).unwrap(),
        }).collect();
        let norm = Normalization::fit(&samples).unwrap();
        for s in &samples {
            let back = norm.invert(&norm.apply(s).unwrap()).unwrap();
            for (x, y) in s.frames.as_slice().iter().zip(back.frames.as_slice()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn aggregate_matches_definition(v in prop::collection::vec(-1e3f64..1e3, 1..40)) {
        let a = aggregate(&v);
        prop_assert_eq!(a.n, v.len());
        prop_assert!(a.sd >= 0.0);
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(a.mean >= lo - 1e-9 && a.mean <= hi + 1e-9);
        if v.len() == 1 {
            prop_assert_eq!(a.sd, 0.0);
        }
    }
}
