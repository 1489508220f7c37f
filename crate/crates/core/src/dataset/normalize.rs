use serde::{Deserialize, Serialize};

use super::{Dataset, Frames, MotionSample};
use crate::error::{Error, Result};

/// Per-channel z-scoring statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    /// Channels whose variance was zero; their scale is clamped to 1.
    pub degenerate: Vec<usize>,
    /// Ids of the samples the statistics were computed from.
    pub fitted_on: Vec<String>,
}

impl Normalization {
    /// Population mean and SD of every channel over all frames of `samples`.
    pub fn fit(samples: &[MotionSample]) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::TooFewSamples("normalization needs at least one sample".into()))?;
        let d = first.frames.num_channels();
        let mut sum = vec![0.0; d];
        let mut count = 0usize;
        for s in samples {
            if s.frames.num_channels() != d {
                return Err(Error::shape("normalize", d, s.frames.num_channels()));
            }
            for row in s.frames.rows() {
                for (acc, v) in sum.iter_mut().zip(row) {
                    *acc += v;
                }
            }
            count += s.frames.num_frames();
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        let mut sq = vec![0.0; d];
        for s in samples {
            for row in s.frames.rows() {
                for c in 0..d {
                    let e = row[c] - mean[c];
                    sq[c] += e * e;
                }
            }
        }
        let mut degenerate = Vec::new();
        let scale = sq
            .iter()
            .enumerate()
            .map(|(c, s)| {
                let sd = (s / count as f64).sqrt();
                if sd < 1e-12 {
                    degenerate.push(c);
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Normalization {
            mean,
            scale,
            degenerate,
            fitted_on: samples.iter().map(|s| s.id.clone()).collect(),
        })
    }

    pub fn num_channels(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_frames(&self, f: &Frames) -> Result<Frames> {
        self.transform(f, |v, m, s| (v - m) / s)
    }

    pub fn invert_frames(&self, f: &Frames) -> Result<Frames> {
        self.transform(f, |v, m, s| v * s + m)
    }

    fn transform(&self, f: &Frames, op: impl Fn(f64, f64, f64) -> f64) -> Result<Frames> {
        let d = self.num_channels();
        if f.num_channels() != d {
            return Err(Error::shape("normalize", format!("{d} channels"), f.num_channels()));
        }
        let data = f
            .as_slice()
            .iter()
            .enumerate()
            .map(|(i, &v)| op(v, self.mean[i % d], self.scale[i % d]))
            .collect();
        Frames::new(f.num_frames(), d, data)
    }

    pub fn apply(&self, s: &MotionSample) -> Result<MotionSample> {
        Ok(MotionSample {
            frames: self.apply_frames(&s.frames)?,
            ..s.clone()
        })
    }

    pub fn invert(&self, s: &MotionSample) -> Result<MotionSample> {
        Ok(MotionSample {
            frames: self.invert_frames(&s.frames)?,
            ..s.clone()
        })
    }

    pub fn apply_dataset(&self, ds: &Dataset) -> Result<Dataset> {
        let samples = ds.samples.iter().map(|s| self.apply(s)).collect::<Result<_>>()?;
        Ok(Dataset {
            samples,
            schema: ds.schema.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{StrokeQuality, StrokeType};

    fn sample(id: &str, data: Vec<f64>) -> MotionSample {
        let t = data.len() / 3;
        MotionSample {
            id: id.into(),
            stroke_type: StrokeType::ForehandClear,
            label: Some(StrokeQuality::Poor),
            frames: Frames::new(t, 3, data).unwrap(),
        }
    }

    #[test]
    fn constant_channel_is_flagged_and_zeroed() {
        let a = sample("a", vec![1.0, 5.0, 0.0, 2.0, 5.0, 1.0]);
        let b = sample("b", vec![3.0, 5.0, 2.0, 4.0, 5.0, 3.0]);
        let n = Normalization::fit(&[a.clone(), b]).unwrap();
        assert_eq!(n.degenerate, vec![1]);
        let z = n.apply(&a).unwrap();
        assert_eq!(z.frames.get(0, 1), 0.0);
        assert_eq!(z.frames.get(1, 1), 0.0);
    }

    #[test]
    fn training_mean_is_zero_and_round_trip() {
        let a = sample("a", vec![1.0, -5.0, 0.3, 2.0, 7.0, 1.0, 0.1, 0.2, 0.3]);
        let b = sample("b", vec![3.0, 5.0, 2.0, 4.0, 5.5, 3.0, 9.0, -2.0, 0.0]);
        let n = Normalization::fit(&[a.clone(), b.clone()]).unwrap();
        let za = n.apply(&a).unwrap();
        let zb = n.apply(&b).unwrap();
        for c in 0..3 {
            let m: f64 = za.frames.rows().chain(zb.frames.rows()).map(|r| r[c]).sum::<f64>() / 6.0;
            assert!(m.abs() < 1e-9);
        }
        let back = n.invert(&za).unwrap();
        for (x, y) in back.frames.as_slice().iter().zip(a.frames.as_slice()) {
            assert!((x - y).abs() < 1e-9);
        }
        assert_eq!(n.fitted_on, vec!["a".to_string(), "b".to_string()]);
    }
}
