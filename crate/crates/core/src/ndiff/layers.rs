use serde::{Deserialize, Serialize};

use super::graph::{Graph, Var};
use super::params::{Bindings, ParameterSet};
use super::tensor::Tensor;
use crate::error::Result;

/// One building block of a network. Parameterised layers refer to their
/// tensors by name in a [`ParameterSet`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layer {
    /// `[B, in] -> [B, out]`, weight `[out, in]`, bias `[out]`.
    Dense {
        weight: String,
        bias: String,
    },
    /// `[B, Cin, T] -> [B, Cout, T']`, weight `[Cout, Cin, K]`, bias `[Cout]`.
    Conv1d {
        weight: String,
        bias: String,
        stride: usize,
        padding: usize,
    },
    Relu,
    Tanh,
    /// Over the last axis.
    Softmax,
    /// `[B, C, T] -> [B, C, T / window]`, or `[B, C]` when `window` is `None`.
    MeanPool {
        window: Option<usize>,
    },
    /// `[B, C, T] -> [B, C, T · factor]`.
    Upsample {
        factor: usize,
    },
    /// Reshape keeping the leading batch axis.
    Reshape {
        shape: Vec<usize>,
    },
}

impl Layer {
    pub fn forward(&self, g: &mut Graph, x: Var, bound: &Bindings) -> Result<Var> {
        match self {
            Layer::Dense { weight, bias } => g.dense(x, bound.get(weight)?, bound.get(bias)?),
            Layer::Conv1d {
                weight,
                bias,
                stride,
                padding,
            } => g.conv1d(x, bound.get(weight)?, bound.get(bias)?, *stride, *padding),
            Layer::Relu => g.relu(x),
            Layer::Tanh => g.tanh(x),
            Layer::Softmax => g.softmax(x),
            Layer::MeanPool { window } => g.mean_pool(x, *window),
            Layer::Upsample { factor } => g.upsample(x, *factor),
            Layer::Reshape { shape } => {
                let batch = g.value(x).shape().first().copied().unwrap_or(1);
                let mut full = Vec::with_capacity(shape.len() + 1);
                full.push(batch);
                full.extend_from_slice(shape);
                g.reshape(x, full)
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sequential {
    pub layers: Vec<Layer>,
}

impl Sequential {
    pub fn new(layers: Vec<Layer>) -> Self {
        Sequential { layers }
    }

    pub fn forward(&self, g: &mut Graph, mut x: Var, bound: &Bindings) -> Result<Var> {
        for layer in &self.layers {
            x = layer.forward(g, x, bound)?;
        }
        Ok(x)
    }
}

/// Evaluates a single layer outside of any training graph.
pub fn layer_forward(layer: &Layer, input: &Tensor, params: &ParameterSet) -> Result<Tensor> {
    let mut g = Graph::new();
    let bound = params.bind(&mut g);
    let x = g.leaf(input.clone());
    let y = layer.forward(&mut g, x, &bound)?;
    Ok(g.value(y).clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_identity_layer() {
        let mut ps = ParameterSet::new();
        let mut eye = Tensor::zeros(vec![2, 2]);
        eye.data_mut()[0] = 1.0;
        eye.data_mut()[3] = 1.0;
        ps.insert("w", eye);
        ps.insert("b", Tensor::zeros(vec![2]));
        let layer = Layer::Dense {
            weight: "w".into(),
            bias: "b".into(),
        };
        let x = Tensor::new(vec![1, 2], vec![4.0, -1.0]).unwrap();
        assert_eq!(layer_forward(&layer, &x, &ps).unwrap(), x);
    }

    #[test]
    fn missing_parameter_is_structural() {
        let layer = Layer::Dense {
            weight: "w".into(),
            bias: "b".into(),
        };
        let x = Tensor::zeros(vec![1, 2]);
        assert!(layer_forward(&layer, &x, &ParameterSet::new()).is_err());
    }

    #[test]
    fn reshape_keeps_batch() {
        let layer = Layer::Reshape { shape: vec![2, 3] };
        let x = Tensor::zeros(vec![4, 6]);
        let y = layer_forward(&layer, &x, &ParameterSet::new()).unwrap();
        assert_eq!(y.shape(), &[4, 2, 3]);
    }
}
