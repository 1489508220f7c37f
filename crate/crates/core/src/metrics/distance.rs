use serde::{Deserialize, Serialize};

use crate::dataset::Frames;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    L1,
    L2,
    Linf,
}

/// Plain vector norm of the flattened difference `x - x_cf`.
pub fn proximity(x: &Frames, x_cf: &Frames, norm: Norm) -> Result<f64> {
    if x.shape() != x_cf.shape() {
        return Err(Error::shape(
            "proximity",
            format!("{:?}", x.shape()),
            format!("{:?}", x_cf.shape()),
        ));
    }
    Ok(vector_norm(x.as_slice(), x_cf.as_slice(), norm))
}

pub(crate) fn vector_norm(a: &[f64], b: &[f64], norm: Norm) -> f64 {
    let diffs = a.iter().zip(b).map(|(p, q)| (p - q).abs());
    match norm {
        Norm::L1 => diffs.sum(),
        Norm::L2 => diffs.map(|d| d * d).sum::<f64>().sqrt(),
        Norm::Linf => diffs.fold(0.0, f64::max),
    }
}

fn frame_cost(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// Dynamic time warping with Euclidean per-frame ground cost, no window,
/// steps {match, insert, delete}. Sequences may differ in length.
pub fn dtw(x: &Frames, y: &Frames) -> Result<f64> {
    if x.num_frames() == 0 || y.num_frames() == 0 {
        return Err(Error::TooFewSamples("dtw needs non-empty sequences".into()));
    }
    if x.num_channels() != y.num_channels() {
        return Err(Error::shape("dtw", x.num_channels(), y.num_channels()));
    }
    let m = y.num_frames();
    // two rolling rows of the (n+1) x (m+1) table
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for a in x.rows() {
        cur[0] = f64::INFINITY;
        for (j, b) in y.rows().enumerate() {
            let best = prev[j].min(prev[j + 1]).min(cur[j]);
            cur[j + 1] = frame_cost(a, b) + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(v: &[f64]) -> Frames {
        Frames::new(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn proximity_identity_and_basis() {
        let x = Frames::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        for n in [Norm::L1, Norm::L2, Norm::Linf] {
            assert_eq!(proximity(&x, &x, n).unwrap(), 0.0);
        }
        let mut y = x.clone();
        y.set(0, 0, 2.0);
        for n in [Norm::L1, Norm::L2, Norm::Linf] {
            assert_eq!(proximity(&x, &y, n).unwrap(), 1.0);
        }
    }

    #[test]
    fn proximity_hand_values() {
        let x = seq(&[0.0, 0.0, 0.0]);
        let y = seq(&[1.0, -2.0, 3.0]);
        assert_eq!(proximity(&x, &y, Norm::L1).unwrap(), 6.0);
        assert!((proximity(&x, &y, Norm::L2).unwrap() - 14f64.sqrt()).abs() < 1e-12);
        assert_eq!(proximity(&x, &y, Norm::Linf).unwrap(), 3.0);
    }

    #[test]
    fn proximity_shape_mismatch() {
        assert!(matches!(
            proximity(&seq(&[0.0]), &seq(&[0.0, 1.0]), Norm::L1),
            Err(Error::Structure { .. })
        ));
    }

    #[test]
    fn dtw_hand_case() {
        let a = seq(&[0.0, 0.0, 1.0]);
        let b = seq(&[0.0, 1.0, 1.0]);
        assert_eq!(dtw(&a, &b).unwrap(), 0.0);
        assert_eq!(proximity(&a, &b, Norm::L1).unwrap(), 1.0);
        assert_eq!(dtw(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn dtw_unequal_lengths() {
        assert_eq!(dtw(&seq(&[0.0, 1.0]), &seq(&[0.0, 0.0, 0.0, 1.0])).unwrap(), 0.0);
        assert_eq!(dtw(&seq(&[0.0]), &seq(&[1.0, 2.0])).unwrap(), 3.0);
    }

    #[test]
    fn dtw_empty_is_error() {
        assert!(dtw(&Frames::zeros(0, 1), &seq(&[1.0])).is_err());
    }
}
