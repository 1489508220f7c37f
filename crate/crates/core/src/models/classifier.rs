use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::train::{batch_tensor, channel_major, fit, TrainHp, TrainTrace};
use crate::dataset::{Frames, MotionSample, StrokeQuality};
use crate::error::{Error, Result};
use crate::ndiff::{Bindings, Graph, Layer, ParameterSet, Sequential, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierArch {
    Conv1d,
    Mlp,
}

impl ClassifierArch {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierArch::Conv1d => "conv1d",
            ClassifierArch::Mlp => "mlp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierHp {
    pub arch: ClassifierArch,
    /// Conv channels, or hidden units for the MLP.
    pub width: usize,
    pub kernel: usize,
    pub train: TrainHp,
}

impl Default for ClassifierHp {
    fn default() -> Self {
        ClassifierHp {
            arch: ClassifierArch::Conv1d,
            width: 8,
            kernel: 5,
            train: TrainHp::default(),
        }
    }
}

/// Two-class stroke-quality classifier over `T × D` motions.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub arch: ClassifierArch,
    pub frames: usize,
    pub channels: usize,
    pub net: Sequential,
    pub params: ParameterSet,
}

impl Classifier {
    /// Freshly initialised network.
    pub fn init(hp: &ClassifierHp, frames: usize, channels: usize, seed: u64) -> Result<Self> {
        if hp.width == 0 || hp.kernel == 0 || hp.kernel.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "classifier needs width > 0 and an odd kernel, got {} / {}",
                hp.width, hp.kernel
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParameterSet::new();
        let w = hp.width;
        let k = hp.kernel;
        let dense = |name: &str| Layer::Dense {
            weight: format!("{name}.weight"),
            bias: format!("{name}.bias"),
        };
        let net = match hp.arch {
            ClassifierArch::Conv1d => {
                let conv = |name: &str| Layer::Conv1d {
                    weight: format!("{name}.weight"),
                    bias: format!("{name}.bias"),
                    stride: 1,
                    padding: k / 2,
                };
                params.insert_glorot("conv1.weight", vec![w, channels, k], channels * k, w * k, &mut rng);
                params.insert("conv1.bias", Tensor::zeros(vec![w]));
                params.insert_glorot("conv2.weight", vec![w, w, k], w * k, w * k, &mut rng);
                params.insert("conv2.bias", Tensor::zeros(vec![w]));
                params.insert_glorot("head.weight", vec![2, w], w, 2, &mut rng);
                params.insert("head.bias", Tensor::zeros(vec![2]));
                vec![
                    conv("conv1"),
                    Layer::Relu,
                    conv("conv2"),
                    Layer::Relu,
                    Layer::MeanPool { window: None },
                    dense("head"),
                    Layer::Softmax,
                ]
            }
            ClassifierArch::Mlp => {
                let n_in = frames * channels;
                params.insert_glorot("hidden.weight", vec![w, n_in], n_in, w, &mut rng);
                params.insert("hidden.bias", Tensor::zeros(vec![w]));
                params.insert_glorot("head.weight", vec![2, w], w, 2, &mut rng);
                params.insert("head.bias", Tensor::zeros(vec![2]));
                vec![
                    Layer::Reshape { shape: vec![n_in] },
                    dense("hidden"),
                    Layer::Relu,
                    dense("head"),
                    Layer::Softmax,
                ]
            }
        };
        Ok(Classifier {
            arch: hp.arch,
            frames,
            channels,
            net: Sequential::new(net),
            params,
        })
    }

    /// Graph forward for `[B, D, T]` input; returns `[B, 2]` probabilities.
    pub fn forward(&self, g: &mut Graph, x: Var, bound: &Bindings) -> Result<Var> {
        let s = g.value(x).shape();
        if s.len() != 3 || s[1] != self.channels || s[2] != self.frames {
            return Err(Error::shape(
                "classifier",
                format!("[B, {}, {}]", self.channels, self.frames),
                format!("{s:?}"),
            ));
        }
        self.net.forward(g, x, bound)
    }

    fn check(&self, f: &Frames) -> Result<()> {
        if f.shape() != (self.frames, self.channels) {
            return Err(Error::shape(
                "classifier",
                format!("{}x{} frames", self.frames, self.channels),
                format!("{}x{}", f.num_frames(), f.num_channels()),
            ));
        }
        Ok(())
    }

    /// Class probabilities `[p_poor, p_good]`.
    pub fn predict_proba(&self, x: &Frames) -> Result<[f64; 2]> {
        Ok(self.predict_proba_batch(std::slice::from_ref(x))?[0])
    }

    pub fn predict_proba_batch(&self, xs: &[Frames]) -> Result<Vec<[f64; 2]>> {
        if xs.is_empty() {
            return Ok(Vec::new());
        }
        let mut data = Vec::with_capacity(xs.len() * self.frames * self.channels);
        for x in xs {
            self.check(x)?;
            data.extend(x.to_channel_major());
        }
        let mut g = Graph::new();
        let bound = self.params.bind(&mut g);
        let input = g.leaf(Tensor::new(vec![xs.len(), self.channels, self.frames], data)?);
        let p = self.forward(&mut g, input, &bound)?;
        Ok(g.value(p).data().chunks(2).map(|r| [r[0], r[1]]).collect())
    }

    pub fn predict(&self, x: &Frames) -> Result<StrokeQuality> {
        Ok(argmax(self.predict_proba(x)?))
    }
}

pub fn argmax(p: [f64; 2]) -> StrokeQuality {
    if p[1] > p[0] {
        StrokeQuality::Good
    } else {
        StrokeQuality::Poor
    }
}

fn labelled(samples: &[MotionSample]) -> Result<Vec<usize>> {
    samples
        .iter()
        .map(|s| {
            s.label.map(StrokeQuality::index).ok_or_else(|| Error::Ingestion {
                location: format!("sample `{}`", s.id),
                message: "classifier training needs labels".into(),
            })
        })
        .collect()
}

/// Trains a classifier with cross-entropy and Adam on normalised samples.
pub fn train_classifier(
    train: &[MotionSample],
    validation: Option<&[MotionSample]>,
    hp: &ClassifierHp,
) -> Result<(Classifier, TrainTrace)> {
    let first = train
        .first()
        .ok_or_else(|| Error::TooFewSamples("empty training set".into()))?;
    let (frames, channels) = first.frames.shape();
    let mut model = Classifier::init(hp, frames, channels, hp.train.seed)?;
    let targets = labelled(train)?;
    let cm = channel_major(train);
    let val = match validation {
        Some(v) if !v.is_empty() => Some((channel_major(v), labelled(v)?)),
        _ => None,
    };
    let net = model.clone();
    let trace = fit(
        &mut model.params,
        &hp.train,
        train.len(),
        |g, bound, idx| {
            let x = g.leaf(batch_tensor(&cm, idx, channels, frames));
            let p = net.forward(g, x, bound)?;
            let t: Vec<usize> = idx.iter().map(|&i| targets[i]).collect();
            g.cross_entropy(p, &t)
        },
        |params| {
            let Some((vcm, vt)) = &val else { return Ok(None) };
            let mut g = Graph::new();
            let bound = params.bind(&mut g);
            let idx: Vec<usize> = (0..vcm.len()).collect();
            let x = g.leaf(batch_tensor(vcm, &idx, channels, frames));
            let p = net.forward(&mut g, x, &bound)?;
            let l = g.cross_entropy(p, vt)?;
            Ok(Some(g.value(l).item()))
        },
    )?;
    Ok((model, trace))
}

/// Predicts the most frequent training label for every input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MajorityBaseline {
    pub class: StrokeQuality,
}

impl MajorityBaseline {
    /// Ties go to the lower class index.
    pub fn fit(labels: &[StrokeQuality]) -> Self {
        let good = labels.iter().filter(|&&l| l == StrokeQuality::Good).count();
        let class = if good * 2 > labels.len() {
            StrokeQuality::Good
        } else {
            StrokeQuality::Poor
        };
        MajorityBaseline { class }
    }

    pub fn predict(&self) -> StrokeQuality {
        self.class
    }
}
