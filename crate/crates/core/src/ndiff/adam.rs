use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::params::ParameterSet;
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            ..Default::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates for every parameter plus the step count.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    moments: BTreeMap<String, (Tensor, Tensor)>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        AdamState {
            config,
            step: 0,
            moments: BTreeMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, name: &str) -> Option<&Tensor> {
        self.moments.get(name).map(|(m, _)| m)
    }

    pub fn second_moment(&self, name: &str) -> Option<&Tensor> {
        self.moments.get(name).map(|(_, v)| v)
    }
}

/// One bias-corrected Adam update using the gradient buffers of `params`.
///
/// A non-finite gradient anywhere aborts the whole step before any state
/// or parameter is touched.
pub fn adam_step(state: &mut AdamState, params: &mut ParameterSet) -> Result<()> {
    for (name, p) in params.iter() {
        if !p.grad.is_finite() {
            return Err(Error::NonFiniteGradient {
                param: name.to_string(),
            });
        }
    }
    state.step += 1;
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        eps,
    } = state.config;
    let t = state.step as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    for (name, p) in params.iter_mut() {
        let (m, v) = state.moments.entry(name.to_string()).or_insert_with(|| {
            (
                Tensor::zeros(p.value.shape().to_vec()),
                Tensor::zeros(p.value.shape().to_vec()),
            )
        });
        let values = p.value.data_mut();
        for (i, &g) in p.grad.data().iter().enumerate() {
            let mi = &mut m.data_mut()[i];
            *mi = beta1 * *mi + (1.0 - beta1) * g;
            let m_hat = *mi / bc1;
            let vi = &mut v.data_mut()[i];
            *vi = beta2 * *vi + (1.0 - beta2) * g * g;
            let v_hat = *vi / bc2;
            values[i] -= learning_rate * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(value: f64, grad: f64) -> ParameterSet {
        let mut ps = ParameterSet::new();
        ps.insert("w", Tensor::from_vec(vec![value]));
        ps.grad_mut("w").unwrap().data_mut()[0] = grad;
        ps
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut ps = single(0.0, 1.0);
        let mut st = AdamState::new(AdamConfig::default());
        adam_step(&mut st, &mut ps).unwrap();
        // m̂ = 1, v̂ = 1 → Δ = −α / (1 + ε)
        let expected = -1e-3 / (1.0 + 1e-8);
        assert!((ps.get("w").unwrap().item() - expected).abs() < 1e-15);
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn second_step_also_moves_by_learning_rate() {
        let mut ps = single(0.0, 1.0);
        let mut st = AdamState::new(AdamConfig::default());
        adam_step(&mut st, &mut ps).unwrap();
        let after_one = ps.get("w").unwrap().item();
        adam_step(&mut st, &mut ps).unwrap();
        let delta = ps.get("w").unwrap().item() - after_one;
        assert!((delta + 1e-3).abs() < 1e-10, "{delta}");
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut ps = single(2.5, 0.0);
        let mut st = AdamState::new(AdamConfig::default());
        for _ in 0..5 {
            adam_step(&mut st, &mut ps).unwrap();
        }
        assert_eq!(ps.get("w").unwrap().item(), 2.5);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut ps = single(1.0, f64::NAN);
        ps.insert("a", Tensor::from_vec(vec![3.0]));
        let mut st = AdamState::new(AdamConfig::default());
        let err = adam_step(&mut st, &mut ps).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { ref param } if param == "w"));
        assert_eq!(st.step_count(), 0);
        assert_eq!(ps.get("a").unwrap().item(), 3.0);
    }

    #[test]
    fn deterministic_bitwise() {
        let run = || {
            let mut ps = ParameterSet::new();
            ps.insert("w", Tensor::from_vec(vec![0.1, -0.7, 3.3]));
            let mut st = AdamState::new(AdamConfig::with_learning_rate(0.05));
            for k in 0..10 {
                let g = ps.grad_mut("w").unwrap();
                for (i, v) in g.data_mut().iter_mut().enumerate() {
                    *v = ((i + k) as f64 * 0.37).sin();
                }
                adam_step(&mut st, &mut ps).unwrap();
            }
            ps.get("w")
                .unwrap()
                .data()
                .iter()
                .map(|v| v.to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
