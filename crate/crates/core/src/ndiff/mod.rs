//! Minimal reverse-mode differentiation over `f64` tensors.
//!
//! The primitive set is deliberately small: dense, conv1d, relu, tanh,
//! softmax, mean-pool (plus upsample/reshape plumbing for decoders), the
//! cross-entropy and MSE losses, and the Adam optimiser. Both model training
//! and the latent counterfactual search run on top of it.

mod adam;
mod graph;
mod layers;
mod params;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use graph::{Gradients, Graph, Var, PROB_FLOOR};
pub use layers::{layer_forward, Layer, Sequential};
pub use params::{Bindings, Param, ParameterSet};
pub use tensor::Tensor;

/// Standalone cross-entropy of one probability vector against a class index.
///
/// Returns `(loss, floored)` where `floored` reports that the target
/// probability was below [`PROB_FLOOR`] and got clamped.
pub fn cross_entropy(probabilities: &[f64], target: usize) -> crate::Result<(f64, bool)> {
    let mut g = Graph::new();
    let p = g.leaf(Tensor::new(vec![1, probabilities.len()], probabilities.to_vec())?);
    let l = g.cross_entropy(p, &[target])?;
    Ok((g.value(l).item(), g.floor_events() > 0))
}
