//! Motion samples, the synthetic stroke generator, motion-file ingestion,
//! normalisation, augmentation and stratified splitting.

mod augment;
pub(crate) mod io;
mod normalize;
mod split;
mod synth;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use augment::{augment, AugmentPolicy};
pub use io::{
    load_motion_file, parse_motion_csv, read_sidecar, sidecar_path, write_motion_file, write_motion_rows, LoadOptions,
};
pub use normalize::Normalization;
pub use split::{stratified_holdout, stratified_kfold, Fold};
pub use synth::{generate_synthetic, SynthConfig};

/// Binary stroke-quality annotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrokeQuality {
    Poor = 0,
    Good = 1,
}

impl StrokeQuality {
    pub const ALL: [StrokeQuality; 2] = [StrokeQuality::Poor, StrokeQuality::Good];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(StrokeQuality::Poor),
            1 => Some(StrokeQuality::Good),
            _ => None,
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            StrokeQuality::Poor => StrokeQuality::Good,
            StrokeQuality::Good => StrokeQuality::Poor,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StrokeQuality::Poor => "poor",
            StrokeQuality::Good => "good",
        }
    }
}

impl fmt::Display for StrokeQuality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrokeQuality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "poor" | "0" => Ok(StrokeQuality::Poor),
            "good" | "1" => Ok(StrokeQuality::Good),
            other => Err(Error::Config(format!("unknown stroke quality `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrokeType {
    ForehandClear,
    BackhandDrive,
}

impl StrokeType {
    pub fn as_str(self) -> &'static str {
        match self {
            StrokeType::ForehandClear => "forehand_clear",
            StrokeType::BackhandDrive => "backhand_drive",
        }
    }
}

impl fmt::Display for StrokeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrokeType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "forehand_clear" => Ok(StrokeType::ForehandClear),
            "backhand_drive" => Ok(StrokeType::BackhandDrive),
            other => Err(Error::Config(format!("unknown stroke type `{other}`"))),
        }
    }
}

/// Row-major `T × D` matrix of joint coordinates, one row per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frames {
    frames: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Frames {
    pub fn new(frames: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if frames * channels != data.len() {
            return Err(Error::shape(
                "frames",
                format!("{frames}x{channels} = {} values", frames * channels),
                data.len(),
            ));
        }
        Ok(Frames { frames, channels, data })
    }

    pub fn zeros(frames: usize, channels: usize) -> Self {
        Frames {
            frames,
            channels,
            data: vec![0.0; frames * channels],
        }
    }

    pub fn num_frames(&self) -> usize {
        self.frames
    }

    pub fn num_channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.frames, self.channels)
    }

    /// Flattened row-major values (the `T·D` vector used by distance metrics).
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.channels..(t + 1) * self.channels]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.channels.max(1))
    }

    pub fn get(&self, t: usize, c: usize) -> f64 {
        self.data[t * self.channels + c]
    }

    pub fn set(&mut self, t: usize, c: usize, v: f64) {
        self.data[t * self.channels + c] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Channel-major copy (`D × T`), the layout the conv layers consume.
    pub fn to_channel_major(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.data.len()];
        for t in 0..self.frames {
            for c in 0..self.channels {
                out[c * self.frames + t] = self.data[t * self.channels + c];
            }
        }
        out
    }

    pub fn from_channel_major(frames: usize, channels: usize, cm: &[f64]) -> Result<Self> {
        let mut f = Frames::zeros(frames, channels);
        if cm.len() != frames * channels {
            return Err(Error::shape("frames", frames * channels, cm.len()));
        }
        for c in 0..channels {
            for t in 0..frames {
                f.data[t * channels + c] = cm[c * frames + t];
            }
        }
        Ok(f)
    }

    /// Linear-interpolation resampling to `target` frames; endpoints are
    /// kept exactly.
    pub fn resample(&self, target: usize) -> Result<Frames> {
        if self.frames < 2 || target < 2 {
            return Err(Error::shape("resample", "at least 2 frames", self.frames.min(target)));
        }
        if target == self.frames {
            return Ok(self.clone());
        }
        let mut out = Frames::zeros(target, self.channels);
        let ratio = (self.frames - 1) as f64 / (target - 1) as f64;
        for i in 0..target {
            let (lo, frac) = if i == target - 1 {
                (self.frames - 1, 0.0)
            } else {
                let pos = i as f64 * ratio;
                let lo = pos.floor() as usize;
                (lo, pos - lo as f64)
            };
            for c in 0..self.channels {
                let a = self.get(lo, c);
                let v = if frac == 0.0 {
                    a
                } else {
                    a + frac * (self.get(lo + 1, c) - a)
                };
                out.set(i, c, v);
            }
        }
        Ok(out)
    }
}

/// One stroke.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionSample {
    pub id: String,
    pub stroke_type: StrokeType,
    pub label: Option<StrokeQuality>,
    pub frames: Frames,
}

impl MotionSample {
    pub fn num_joints(&self) -> usize {
        self.frames.num_channels() / 3
    }
}

/// Skeleton description shared by every sample of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionSchema {
    pub joint_names: Vec<String>,
    pub frame_rate: f64,
}

impl MotionSchema {
    pub fn num_joints(&self) -> usize {
        self.joint_names.len()
    }

    pub fn num_channels(&self) -> usize {
        3 * self.joint_names.len()
    }

    pub fn generic(joints: usize, frame_rate: f64) -> Self {
        MotionSchema {
            joint_names: (0..joints).map(|j| format!("j{j}")).collect(),
            frame_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<MotionSample>,
    pub schema: MotionSchema,
}

impl Dataset {
    /// Builds a dataset after checking the shared-shape invariants.
    pub fn new(samples: Vec<MotionSample>, schema: MotionSchema) -> Result<Self> {
        let d = schema.num_channels();
        if d == 0 {
            return Err(Error::Config("schema has no joints".into()));
        }
        let t = samples.first().map(|s| s.frames.num_frames());
        for s in &samples {
            if s.frames.num_channels() != d {
                return Err(Error::Ingestion {
                    location: format!("sample `{}`", s.id),
                    message: format!(
                        "{} channels, schema has {} joints ({d} channels)",
                        s.frames.num_channels(),
                        schema.num_joints()
                    ),
                });
            }
            if Some(s.frames.num_frames()) != t {
                return Err(Error::Ingestion {
                    location: format!("sample `{}`", s.id),
                    message: format!("{} frames, expected {}", s.frames.num_frames(), t.unwrap_or_default()),
                });
            }
            if s.frames.num_frames() < 2 {
                return Err(Error::Ingestion {
                    location: format!("sample `{}`", s.id),
                    message: "fewer than 2 frames".into(),
                });
            }
        }
        Ok(Dataset { samples, schema })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_frames(&self) -> usize {
        self.samples.first().map_or(0, |s| s.frames.num_frames())
    }

    pub fn num_channels(&self) -> usize {
        self.schema.num_channels()
    }

    pub fn labels(&self) -> Result<Vec<StrokeQuality>> {
        self.samples
            .iter()
            .map(|s| {
                s.label.ok_or_else(|| Error::Ingestion {
                    location: format!("sample `{}`", s.id),
                    message: "missing label".into(),
                })
            })
            .collect()
    }

    /// Copy of the samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            schema: self.schema.clone(),
        }
    }

    pub fn find(&self, id: &str) -> Option<&MotionSample> {
        self.samples.iter().find(|s| s.id == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resample_ramp_matches_hand_interpolation() {
        // 3-frame ramp 0, 1, 2 (one channel triple) resampled to 5 frames:
        // positions 0, .5, 1, 1.5, 2 → values 0, 0.5, 1, 1.5, 2 on channel 0.
        let f = Frames::new(3, 3, vec![0.0, 10.0, -1.0, 1.0, 20.0, -2.0, 2.0, 30.0, -4.0]).unwrap();
        let r = f.resample(5).unwrap();
        let expect_c0 = [0.0, 0.5, 1.0, 1.5, 2.0];
        let expect_c2 = [-1.0, -1.5, -2.0, -3.0, -4.0];
        for t in 0..5 {
            assert!((r.get(t, 0) - expect_c0[t]).abs() < 1e-12);
            assert!((r.get(t, 2) - expect_c2[t]).abs() < 1e-12);
        }
        assert_eq!(r.row(0), f.row(0));
        assert_eq!(r.row(4), f.row(2));
    }

    #[test]
    fn channel_major_round_trip() {
        let f = Frames::new(4, 3, (0..12).map(f64::from).collect()).unwrap();
        let cm = f.to_channel_major();
        assert_eq!(cm[0..4], [0.0, 3.0, 6.0, 9.0]);
        assert_eq!(Frames::from_channel_major(4, 3, &cm).unwrap(), f);
    }

    #[test]
    fn quality_parsing() {
        assert_eq!("good".parse::<StrokeQuality>().unwrap(), StrokeQuality::Good);
        assert_eq!("0".parse::<StrokeQuality>().unwrap(), StrokeQuality::Poor);
        assert!("meh".parse::<StrokeQuality>().is_err());
        assert_eq!(StrokeQuality::Poor.opposite(), StrokeQuality::Good);
    }
}
