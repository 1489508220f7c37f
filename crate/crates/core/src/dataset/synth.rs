//! Desk-scale surrogate for recorded badminton strokes.
//!
//! Each stroke is a backswing followed by a main swing, both integrated
//! from Gaussian-bump velocity profiles and applied along a per-sample
//! swing direction with a distal-to-proximal gain per joint. Nuisance
//! factors (stance offset, body scale, swing direction, backswing size)
//! vary per sample independently of the class, as does frame jitter. Five
//! factors carry the class signal, each drawn as `N(separation · class, 1)`
//! in standardised units: main-swing amplitude (peak wrist speed), timing,
//! sharpness (bump width), kinetic-chain lag (proximal joints leading the
//! wrist) and proximal involvement (swing gain of the non-wrist joints).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Dataset, Frames, MotionSample, MotionSchema, StrokeQuality, StrokeType};
use crate::error::{Error, Result};

const NAMED_JOINTS: [&str; 5] = ["wrist", "elbow", "shoulder", "hip", "root"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_per_class: usize,
    pub frames: usize,
    pub joints: usize,
    pub class_separation: f64,
    /// Per-coordinate frame jitter in meters, independent of the class.
    pub noise_sd: f64,
    pub seed: u64,
    pub stroke_type: StrokeType,
    pub frame_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_per_class: 50,
            frames: 60,
            joints: 5,
            class_separation: 2.0,
            noise_sd: 0.002,
            seed: 7,
            stroke_type: StrokeType::ForehandClear,
            frame_rate: 60.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_per_class == 0 {
            return Err(Error::Config("n_per_class must be positive".into()));
        }
        if self.frames < 8 {
            return Err(Error::Config("synthetic strokes need at least 8 frames".into()));
        }
        if self.joints == 0 {
            return Err(Error::Config("at least one joint required".into()));
        }
        if !(self.class_separation >= 0.0 && self.class_separation.is_finite()) {
            return Err(Error::Config("class_separation must be finite and >= 0".into()));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::Config("noise_sd must be finite and >= 0".into()));
        }
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return Err(Error::Config("frame_rate must be positive".into()));
        }
        Ok(())
    }

    pub fn schema(&self) -> MotionSchema {
        let joint_names = if self.joints == NAMED_JOINTS.len() {
            NAMED_JOINTS.iter().map(|s| s.to_string()).collect()
        } else {
            (0..self.joints).map(|j| format!("j{j}")).collect()
        };
        MotionSchema {
            joint_names,
            frame_rate: self.frame_rate,
        }
    }
}

fn rest_position(j: usize) -> [f64; 3] {
    const TABLE: [[f64; 3]; 5] = [
        [0.45, 1.05, 0.15],
        [0.35, 1.20, 0.05],
        [0.20, 1.45, 0.00],
        [0.15, 0.95, 0.00],
        [0.00, 0.95, 0.00],
    ];
    if j < TABLE.len() {
        TABLE[j]
    } else {
        let k = (j - TABLE.len() + 1) as f64;
        [-0.05 * k, 0.95 - 0.1 * k, 0.05 * k]
    }
}

/// Cumulative Gaussian-bump velocity, scaled so the full bump integrates to 1.
fn bump_displacement(frames: usize, centre: f64, width: f64) -> Vec<f64> {
    let norm = (2.0 * std::f64::consts::PI).sqrt() * width;
    let mut acc = 0.0;
    (0..frames)
        .map(|t| {
            let u = (t as f64 - centre) / width;
            acc += (-0.5 * u * u).exp() / norm;
            acc
        })
        .collect()
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn generate_one(cfg: &SynthConfig, class: StrokeQuality, rng: &mut ChaCha8Rng) -> Frames {
    let t_len = cfg.frames;
    let tf = t_len as f64;
    let shift = cfg.class_separation * class.index() as f64;

    // class-bearing factors
    let z_speed = shift + gauss(rng);
    let z_timing = shift + gauss(rng);
    let z_sharp = shift + gauss(rng);
    let z_chain = shift + gauss(rng);
    let z_body = shift + gauss(rng);

    // nuisance factors
    let offset = [0.05 * gauss(rng), 0.03 * gauss(rng), 0.05 * gauss(rng)];
    let body_scale = 1.0 + 0.05 * gauss(rng);
    let (azimuth0, elevation0) = match cfg.stroke_type {
        StrokeType::ForehandClear => (0.3, 0.6),
        StrokeType::BackhandDrive => (2.6, 0.15),
    };
    let azimuth = azimuth0 + 0.1 * gauss(rng);
    let elevation = elevation0 + 0.06 * gauss(rng);
    let backswing = (0.25 + 0.06 * gauss(rng)).max(0.02);
    let back_centre = tf * (0.25 + 0.02 * gauss(rng));

    let amplitude = 0.8 * (1.0 + 0.2 * z_speed);
    let main_centre = tf * (0.58 - 0.05 * z_timing);
    let main_width = 0.07 * tf * (1.0 - 0.08 * z_sharp).max(0.3);
    let chain_lag = 0.012 * tf * (1.0 + 0.5 * z_chain);
    let jitter_sd = cfg.noise_sd;

    let dir = [
        elevation.cos() * azimuth.cos(),
        elevation.sin(),
        elevation.cos() * azimuth.sin(),
    ];
    let main: Vec<Vec<f64>> = (0..cfg.joints)
        .map(|j| bump_displacement(t_len, main_centre - chain_lag * j as f64, main_width))
        .collect();
    let back = bump_displacement(t_len, back_centre, 0.06 * tf);

    let channels = 3 * cfg.joints;
    let mut frames = Frames::zeros(t_len, channels);
    let jitter = Normal::new(0.0, jitter_sd.max(0.0)).expect("finite sd");
    for t in 0..t_len {
        for (j, curve) in main.iter().enumerate() {
            let swing = amplitude * curve[t] - backswing * back[t];
            let gain = if j == 0 {
                1.0
            } else {
                0.55f64.powi(j as i32) * (1.0 + 0.2 * z_body).max(0.1)
            };
            let rest = rest_position(j);
            for a in 0..3 {
                let mut v = offset[a] + body_scale * rest[a] + gain * swing * dir[a];
                if jitter_sd > 0.0 {
                    v += jitter.sample(rng);
                }
                frames.set(t, 3 * j + a, v);
            }
        }
    }
    frames
}

/// Deterministic synthetic dataset: `n_per_class` poor strokes followed by
/// `n_per_class` good strokes.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut samples = Vec::with_capacity(2 * cfg.n_per_class);
    for class in StrokeQuality::ALL {
        for i in 0..cfg.n_per_class {
            // independent stream per sample keeps samples stable if counts change
            let mut srng = ChaCha8Rng::seed_from_u64(rng.random());
            let frames = generate_one(cfg, class, &mut srng);
            samples.push(MotionSample {
                id: format!("{}-{}-{i:04}", cfg.stroke_type.as_str(), class.as_str()),
                stroke_type: cfg.stroke_type,
                label: Some(class),
                frames,
            });
        }
    }
    Dataset::new(samples, cfg.schema())
}
