use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::MotionSample;
use crate::error::{Error, Result};
use crate::ndiff::{adam_step, AdamConfig, AdamState, Bindings, Graph, ParameterSet, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainHp {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainHp {
    fn default() -> Self {
        TrainHp {
            learning_rate: 1e-3,
            epochs: 50,
            batch_size: 16,
            seed: 0,
        }
    }
}

impl TrainHp {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// Per-epoch mean losses.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
}

/// `[B, D, T]` batch tensor from channel-major sample buffers.
pub(crate) fn batch_tensor(cm: &[Vec<f64>], idx: &[usize], channels: usize, frames: usize) -> Tensor {
    let mut data = Vec::with_capacity(idx.len() * channels * frames);
    for &i in idx {
        data.extend_from_slice(&cm[i]);
    }
    Tensor::new(vec![idx.len(), channels, frames], data).expect("consistent batch")
}

pub(crate) fn channel_major(samples: &[MotionSample]) -> Vec<Vec<f64>> {
    samples.iter().map(|s| s.frames.to_channel_major()).collect()
}

/// Mini-batch Adam over `n` examples. `loss_fn` builds the loss of one batch;
/// `val_fn` reports an optional validation loss after each epoch.
pub(crate) fn fit(
    params: &mut ParameterSet,
    hp: &TrainHp,
    n: usize,
    loss_fn: impl Fn(&mut Graph, &Bindings, &[usize]) -> Result<Var>,
    val_fn: impl Fn(&ParameterSet) -> Result<Option<f64>>,
) -> Result<TrainTrace> {
    hp.validate()?;
    if n == 0 {
        return Err(Error::TooFewSamples("training set is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed ^ 0x005e_ed0f_7a1e);
    let mut adam = AdamState::new(AdamConfig::with_learning_rate(hp.learning_rate));
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = TrainTrace::default();
    let mut last_finite = None;
    for epoch in 0..hp.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(hp.batch_size) {
            let mut g = Graph::new();
            let bound = params.bind(&mut g);
            let loss = loss_fn(&mut g, &bound, batch)?;
            let value = g.value(loss).item();
            if !value.is_finite() {
                return Err(Error::Divergence { epoch, last_finite });
            }
            total += value * batch.len() as f64;
            let grads = g.backward(loss)?;
            params.zero_grads();
            params.accumulate(&grads, &bound);
            adam_step(&mut adam, params).map_err(|_| Error::Divergence { epoch, last_finite })?;
        }
        if !params.all_finite() {
            return Err(Error::Divergence { epoch, last_finite });
        }
        trace.train_loss.push(total / n as f64);
        if let Some(v) = val_fn(params)? {
            trace.val_loss.push(v);
        }
        last_finite = Some(epoch);
    }
    Ok(trace)
}
