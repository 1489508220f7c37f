use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::MotionSample;
use crate::error::{Error, Result};

/// Label-preserving training-time augmentation, in normalised units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentPolicy {
    pub jitter: bool,
    pub noise_sd: f64,
    pub amplitude_scale: bool,
    pub scale_range: (f64, f64),
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        AugmentPolicy {
            jitter: true,
            noise_sd: 0.01,
            amplitude_scale: true,
            scale_range: (0.9, 1.1),
        }
    }
}

impl AugmentPolicy {
    pub fn none() -> Self {
        AugmentPolicy {
            jitter: false,
            noise_sd: 0.0,
            amplitude_scale: false,
            scale_range: (1.0, 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.scale_range;
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) || !(lo <= hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::Config(format!("invalid augmentation policy {self:?}")));
        }
        Ok(())
    }
}

/// Jitter adds `N(0, noise_sd)` to every value; amplitude scaling multiplies
/// the whole sample by one `u ~ U[lo, hi]`.
pub fn augment(sample: &MotionSample, policy: &AugmentPolicy, seed: u64) -> Result<MotionSample> {
    policy.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = sample.clone();
    let values = out.frames.as_mut_slice();
    if policy.amplitude_scale {
        let (lo, hi) = policy.scale_range;
        let u = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        values.iter_mut().for_each(|v| *v *= u);
    }
    if policy.jitter && policy.noise_sd > 0.0 {
        let noise = Normal::new(0.0, policy.noise_sd).expect("validated sd");
        values.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Frames, StrokeQuality, StrokeType};

    fn sample() -> MotionSample {
        MotionSample {
            id: "s".into(),
            stroke_type: StrokeType::BackhandDrive,
            label: Some(StrokeQuality::Good),
            frames: Frames::new(4, 3, (0..12).map(|v| v as f64 * 0.1).collect()).unwrap(),
        }
    }

    #[test]
    fn identity_policy() {
        let p = AugmentPolicy {
            jitter: true,
            noise_sd: 0.0,
            amplitude_scale: true,
            scale_range: (1.0, 1.0),
        };
        assert_eq!(augment(&sample(), &p, 5).unwrap(), sample());
    }

    #[test]
    fn jitter_statistics() {
        let s = sample();
        let p = AugmentPolicy {
            amplitude_scale: false,
            ..Default::default()
        };
        // per-channel SD of the difference over 1000 draws
        let mut diffs = vec![Vec::new(); 12];
        for seed in 0..1000 {
            let a = augment(&s, &p, seed).unwrap();
            for (i, (x, y)) in a.frames.as_slice().iter().zip(s.frames.as_slice()).enumerate() {
                diffs[i].push(x - y);
            }
        }
        for d in diffs {
            let m = d.iter().sum::<f64>() / d.len() as f64;
            let sd = (d.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (d.len() - 1) as f64).sqrt();
            assert!((0.005..=0.02).contains(&sd), "{sd}");
        }
    }

    #[test]
    fn label_preserved_and_seeded() {
        let p = AugmentPolicy::default();
        let a = augment(&sample(), &p, 9).unwrap();
        assert_eq!(a.label, sample().label);
        assert_eq!(a, augment(&sample(), &p, 9).unwrap());
        assert_ne!(a, augment(&sample(), &p, 10).unwrap());
    }
}
