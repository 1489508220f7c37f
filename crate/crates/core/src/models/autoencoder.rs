use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::train::{batch_tensor, channel_major, fit, TrainHp, TrainTrace};
use crate::dataset::{Frames, MotionSample};
use crate::error::{Error, Result};
use crate::ndiff::{Bindings, Graph, Layer, ParameterSet, Sequential, Tensor, Var};

/// A point in the autoencoder's latent space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentCode(pub Vec<f64>);

impl LatentCode {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutoencoderHp {
    pub latent_dim: usize,
    pub channels: usize,
    pub kernel: usize,
    /// Temporal mean-pool window of the encoder (and upsample factor of the decoder).
    pub pool: usize,
    pub train: TrainHp,
}

impl Default for AutoencoderHp {
    fn default() -> Self {
        AutoencoderHp {
            latent_dim: 16,
            channels: 16,
            kernel: 5,
            pool: 2,
            train: TrainHp {
                epochs: 150,
                ..TrainHp::default()
            },
        }
    }
}

/// Conv encoder `T × D -> L` and mirrored decoder `L -> T × D`.
#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    pub frames: usize,
    pub channels: usize,
    pub latent_dim: usize,
    pub encoder: Sequential,
    pub decoder: Sequential,
    pub params: ParameterSet,
}

impl Autoencoder {
    pub fn init(hp: &AutoencoderHp, frames: usize, channels: usize, seed: u64) -> Result<Self> {
        if hp.latent_dim == 0 || hp.channels == 0 || hp.kernel.is_multiple_of(2) {
            return Err(Error::Config(
                "autoencoder needs latent_dim, channels > 0 and an odd kernel".into(),
            ));
        }
        if hp.pool == 0 || !frames.is_multiple_of(hp.pool) {
            return Err(Error::Config(format!(
                "pool window {} must divide the frame count {frames}",
                hp.pool
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParameterSet::new();
        let (c, k, l) = (hp.channels, hp.kernel, hp.latent_dim);
        let pooled = frames / hp.pool;
        let flat = c * pooled;

        params.insert_glorot("enc.conv.weight", vec![c, channels, k], channels * k, c * k, &mut rng);
        params.insert("enc.conv.bias", Tensor::zeros(vec![c]));
        params.insert_glorot("enc.dense.weight", vec![l, flat], flat, l, &mut rng);
        params.insert("enc.dense.bias", Tensor::zeros(vec![l]));
        params.insert_glorot("dec.dense.weight", vec![flat, l], l, flat, &mut rng);
        params.insert("dec.dense.bias", Tensor::zeros(vec![flat]));
        params.insert_glorot("dec.conv.weight", vec![channels, c, k], c * k, channels * k, &mut rng);
        params.insert("dec.conv.bias", Tensor::zeros(vec![channels]));

        let encoder = Sequential::new(vec![
            Layer::Conv1d {
                weight: "enc.conv.weight".into(),
                bias: "enc.conv.bias".into(),
                stride: 1,
                padding: k / 2,
            },
            Layer::Relu,
            Layer::MeanPool { window: Some(hp.pool) },
            Layer::Reshape { shape: vec![flat] },
            Layer::Dense {
                weight: "enc.dense.weight".into(),
                bias: "enc.dense.bias".into(),
            },
        ]);
        let decoder = Sequential::new(vec![
            Layer::Dense {
                weight: "dec.dense.weight".into(),
                bias: "dec.dense.bias".into(),
            },
            Layer::Reshape { shape: vec![c, pooled] },
            Layer::Upsample { factor: hp.pool },
            Layer::Conv1d {
                weight: "dec.conv.weight".into(),
                bias: "dec.conv.bias".into(),
                stride: 1,
                padding: k / 2,
            },
        ]);
        Ok(Autoencoder {
            frames,
            channels,
            latent_dim: l,
            encoder,
            decoder,
            params,
        })
    }

    /// `[B, D, T] -> [B, L]`
    pub fn encode_graph(&self, g: &mut Graph, x: Var, bound: &Bindings) -> Result<Var> {
        let s = g.value(x).shape();
        if s.len() != 3 || s[1] != self.channels || s[2] != self.frames {
            return Err(Error::shape(
                "encode",
                format!("[B, {}, {}]", self.channels, self.frames),
                format!("{s:?}"),
            ));
        }
        self.encoder.forward(g, x, bound)
    }

    /// `[B, L] -> [B, D, T]`
    pub fn decode_graph(&self, g: &mut Graph, z: Var, bound: &Bindings) -> Result<Var> {
        let s = g.value(z).shape();
        if s.len() != 2 || s[1] != self.latent_dim {
            return Err(Error::shape(
                "decode",
                format!("[B, {}]", self.latent_dim),
                format!("{s:?}"),
            ));
        }
        self.decoder.forward(g, z, bound)
    }

    pub fn encode(&self, x: &Frames) -> Result<LatentCode> {
        if x.shape() != (self.frames, self.channels) {
            return Err(Error::shape(
                "encode",
                format!("{}x{} frames", self.frames, self.channels),
                format!("{}x{}", x.num_frames(), x.num_channels()),
            ));
        }
        let mut g = Graph::new();
        let bound = self.params.bind(&mut g);
        let input = g.leaf(Tensor::new(vec![1, self.channels, self.frames], x.to_channel_major())?);
        let z = self.encode_graph(&mut g, input, &bound)?;
        Ok(LatentCode(g.value(z).data().to_vec()))
    }

    pub fn decode(&self, z: &LatentCode) -> Result<Frames> {
        if z.dim() != self.latent_dim {
            return Err(Error::shape(
                "decode",
                format!("latent of length {}", self.latent_dim),
                z.dim(),
            ));
        }
        let mut g = Graph::new();
        let bound = self.params.bind(&mut g);
        let zv = g.leaf(Tensor::new(vec![1, self.latent_dim], z.0.clone())?);
        let y = self.decode_graph(&mut g, zv, &bound)?;
        Frames::from_channel_major(self.frames, self.channels, g.value(y).data())
    }

    pub fn reconstruct(&self, x: &Frames) -> Result<Frames> {
        self.decode(&self.encode(x)?)
    }
}

/// Mean over channels of the per-channel reconstruction RMSE.
pub fn reconstruction_rmse(ae: &Autoencoder, samples: &[MotionSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples("no samples to reconstruct".into()));
    }
    let d = ae.channels;
    let mut sq = vec![0.0; d];
    let mut count = 0usize;
    for s in samples {
        let r = ae.reconstruct(&s.frames)?;
        for (a, b) in s.frames.rows().zip(r.rows()) {
            for c in 0..d {
                sq[c] += (a[c] - b[c]).powi(2);
            }
        }
        count += s.frames.num_frames();
    }
    Ok(sq.iter().map(|v| (v / count as f64).sqrt()).sum::<f64>() / d as f64)
}

/// Trains the autoencoder on mean-squared reconstruction error.
pub fn train_autoencoder(
    train: &[MotionSample],
    validation: Option<&[MotionSample]>,
    hp: &AutoencoderHp,
) -> Result<(Autoencoder, TrainTrace)> {
    let first = train
        .first()
        .ok_or_else(|| Error::TooFewSamples("empty training set".into()))?;
    let (frames, channels) = first.frames.shape();
    let mut model = Autoencoder::init(hp, frames, channels, hp.train.seed)?;
    let cm = channel_major(train);
    let val = validation.filter(|v| !v.is_empty()).map(channel_major);
    let net = model.clone();
    let recon_loss = |g: &mut Graph, bound: &Bindings, cm: &[Vec<f64>], idx: &[usize]| -> Result<Var> {
        let x = g.leaf(batch_tensor(cm, idx, channels, frames));
        let z = net.encode_graph(g, x, bound)?;
        let y = net.decode_graph(g, z, bound)?;
        g.mse(y, x)
    };
    let trace = fit(
        &mut model.params,
        &hp.train,
        train.len(),
        |g, bound, idx| recon_loss(g, bound, &cm, idx),
        |params| {
            let Some(vcm) = &val else { return Ok(None) };
            let mut g = Graph::new();
            let bound = params.bind(&mut g);
            let idx: Vec<usize> = (0..vcm.len()).collect();
            let l = recon_loss(&mut g, &bound, vcm, &idx)?;
            Ok(Some(g.value(l).item()))
        },
    )?;
    Ok((model, trace))
}
