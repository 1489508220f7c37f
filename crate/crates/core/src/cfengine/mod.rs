//! Counterfactual generation: gradient search in the autoencoder's latent
//! space, and nearest-neighbour retrieval baselines.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Frames, MotionSample, StrokeQuality};
use crate::error::{Error, Result};
use crate::metrics::{dtw, vector_norm, Norm};
use crate::models::{argmax, Autoencoder, Classifier};
use crate::ndiff::{adam_step, AdamConfig, AdamState, Graph, ParameterSet, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CFParams {
    pub target: StrokeQuality,
    pub learning_rate: f64,
    pub max_iter: usize,
    pub tau: f64,
}

impl Default for CFParams {
    fn default() -> Self {
        CFParams {
            target: StrokeQuality::Good,
            learning_rate: 1e-2,
            max_iter: 500,
            tau: 0.5,
        }
    }
}

impl CFParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("counterfactual learning_rate must be positive".into()));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Config(format!("tau must lie in (0, 1), got {}", self.tau)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "latent")]
    Latent,
    #[serde(rename = "nn-l1")]
    NnL1,
    #[serde(rename = "nn-l2")]
    NnL2,
    #[serde(rename = "nn-dtw")]
    NnDtw,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Latent, Method::NnL1, Method::NnL2, Method::NnDtw];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Latent => "latent",
            Method::NnL1 => "nn-l1",
            Method::NnL2 => "nn-l2",
            Method::NnDtw => "nn-dtw",
        }
    }

    pub fn distance(self) -> Option<Distance> {
        match self {
            Method::Latent => None,
            Method::NnL1 => Some(Distance::L1),
            Method::NnL2 => Some(Distance::L2),
            Method::NnDtw => Some(Distance::Dtw),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| {
            Error::Config(format!(
                "unknown method `{s}` (expected latent, nn-l1, nn-l2 or nn-dtw)"
            ))
        })
    }
}

/// Raw-data distance for the nearest-neighbour baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    L1,
    L2,
    Dtw,
}

impl Distance {
    pub fn between(self, a: &Frames, b: &Frames) -> Result<f64> {
        match self {
            Distance::L1 | Distance::L2 => {
                if a.shape() != b.shape() {
                    return Err(Error::shape(
                        "distance",
                        format!("{:?}", a.shape()),
                        format!("{:?}", b.shape()),
                    ));
                }
                let norm = if self == Distance::L1 { Norm::L1 } else { Norm::L2 };
                Ok(vector_norm(a.as_slice(), b.as_slice(), norm))
            }
            Distance::Dtw => dtw(a, b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CFResult {
    pub method: Method,
    pub target: StrokeQuality,
    pub counterfactual: Frames,
    /// Final target-class probability is at least τ.
    pub valid: bool,
    pub iterations: usize,
    /// Target-class probability of `counterfactual`, recomputed after the search.
    pub final_prob: f64,
    /// `(iteration, loss)`, starting with iteration 0 before any update.
    pub loss_trace: Vec<(usize, f64)>,
    /// Reference sample returned by a nearest-neighbour method.
    pub neighbor_id: Option<String>,
}

struct Probe {
    prob: f64,
    loss: f64,
    grad: Tensor,
}

fn probe(z: &ParameterSet, ae: &Autoencoder, c: &Classifier, target: usize) -> Result<Probe> {
    let mut g = Graph::new();
    let zb = z.bind(&mut g);
    let ab = ae.params.bind(&mut g);
    let cb = c.params.bind(&mut g);
    let decoded = ae.decode_graph(&mut g, zb.get("z")?, &ab)?;
    let probs = c.forward(&mut g, decoded, &cb)?;
    let prob = g.value(probs).data()[target];
    let loss = g.cross_entropy(probs, &[target])?;
    let mut grads = g.backward(loss)?;
    let grad = grads.take(zb.get("z")?).expect("latent is a graph input");
    Ok(Probe {
        prob,
        loss: g.value(loss).item(),
        grad,
    })
}

/// Latent-space counterfactual search.
///
/// `x` must be normalised with the bundle's statistics. The loop runs one
/// Adam step on `z` per iteration while the target-class probability of
/// `C(decode(z))` is below τ. If the budget runs out the iterate with the
/// highest target probability is decoded and returned.
pub fn latent_cf(x: &Frames, params: &CFParams, ae: &Autoencoder, c: &Classifier) -> Result<CFResult> {
    params.validate()?;
    let target = params.target.index();
    let z0 = ae.encode(x)?;
    let mut z = ParameterSet::new();
    z.insert("z", Tensor::new(vec![1, z0.dim()], z0.0)?);
    let mut adam = AdamState::new(AdamConfig::with_learning_rate(params.learning_rate));

    let mut p = probe(&z, ae, c, target)?;
    if !p.loss.is_finite() {
        return Err(Error::NonFiniteLoss { iteration: 0 });
    }
    let mut loss_trace = vec![(0, p.loss)];
    let mut best = (p.prob, z.get("z").expect("z").clone());
    let mut iter = 0;
    while p.prob < params.tau && iter < params.max_iter {
        *z.grad_mut("z").expect("z") = p.grad;
        adam_step(&mut adam, &mut z)?;
        iter += 1;
        p = probe(&z, ae, c, target)?;
        if !p.loss.is_finite() {
            return Err(Error::NonFiniteLoss { iteration: iter });
        }
        loss_trace.push((iter, p.loss));
        if p.prob > best.0 {
            best = (p.prob, z.get("z").expect("z").clone());
        }
    }
    let z_final = if p.prob >= params.tau {
        z.get("z").expect("z").clone()
    } else {
        best.1
    };
    let counterfactual = ae.decode(&crate::models::LatentCode(z_final.into_data()))?;
    let final_prob = c.predict_proba(&counterfactual)?[target];
    Ok(CFResult {
        method: Method::Latent,
        target: params.target,
        counterfactual,
        valid: final_prob >= params.tau,
        iterations: iter,
        final_prob,
        loss_trace,
        neighbor_id: None,
    })
}

/// Reference samples the classifier predicts as the target class.
#[derive(Debug, Clone)]
pub struct NnReference<'a> {
    pub target: StrokeQuality,
    candidates: Vec<(&'a MotionSample, f64)>,
}

impl<'a> NnReference<'a> {
    pub fn new(reference: &'a [MotionSample], c: &Classifier, target: StrokeQuality) -> Result<Self> {
        let frames: Vec<Frames> = reference.iter().map(|s| s.frames.clone()).collect();
        let probs = c.predict_proba_batch(&frames)?;
        let mut candidates: Vec<(&MotionSample, f64)> = reference
            .iter()
            .zip(probs)
            .filter(|(_, p)| argmax(*p) == target)
            .map(|(s, p)| (s, p[target.index()]))
            .collect();
        candidates.sort_by(|a, b| a.0.id.cmp(&b.0.id));
        Ok(NnReference { target, candidates })
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Nearest candidate to `x`; ties go to the lowest sample id.
    pub fn query(&self, x: &Frames, distance: Distance) -> Result<(CFResult, f64)> {
        let mut best: Option<(f64, usize)> = None;
        for (i, (s, _)) in self.candidates.iter().enumerate() {
            let d = distance.between(x, &s.frames)?;
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
        let (d, i) = best.ok_or(Error::NoCandidate {
            target: self.target.index(),
        })?;
        let (s, prob) = self.candidates[i];
        let method = match distance {
            Distance::L1 => Method::NnL1,
            Distance::L2 => Method::NnL2,
            Distance::Dtw => Method::NnDtw,
        };
        let result = CFResult {
            method,
            target: self.target,
            counterfactual: s.frames.clone(),
            valid: true,
            iterations: 0,
            final_prob: prob,
            loss_trace: Vec::new(),
            neighbor_id: Some(s.id.clone()),
        };
        Ok((result, d))
    }
}

/// Nearest reference sample predicted as `target` under `distance`.
pub fn nn_cf(
    x: &Frames,
    target: StrokeQuality,
    distance: Distance,
    reference: &[MotionSample],
    c: &Classifier,
) -> Result<CFResult> {
    Ok(NnReference::new(reference, c, target)?.query(x, distance)?.0)
}

/// Outcome for one instance of a batch.
#[derive(Debug)]
pub struct Explained {
    pub id: String,
    pub result: Result<CFResult>,
}

/// Explains every input with one method, in parallel, preserving order.
/// Failures are reported per instance and do not stop the batch.
pub fn batch_explain(
    inputs: &[MotionSample],
    method: Method,
    params: &CFParams,
    ae: &Autoencoder,
    c: &Classifier,
    reference: &[MotionSample],
) -> Vec<Explained> {
    if inputs.is_empty() {
        return Vec::new();
    }
    let index = method.distance().map(|_| NnReference::new(reference, c, params.target));
    inputs
        .par_iter()
        .map(|s| {
            let result = match (&index, method.distance()) {
                (None, _) => latent_cf(&s.frames, params, ae, c),
                (Some(Ok(idx)), Some(d)) => idx.query(&s.frames, d).map(|r| r.0),
                (Some(Err(e)), _) => Err(Error::Config(e.to_string())),
                (Some(Ok(_)), None) => unreachable!("nearest-neighbour index without distance"),
            };
            Explained {
                id: s.id.clone(),
                result,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::StrokeType;
    use crate::models::{AutoencoderHp, ClassifierHp};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const T: usize = 8;
    const D: usize = 6;

    fn models(seed: u64) -> (Autoencoder, Classifier) {
        let ahp = AutoencoderHp {
            latent_dim: 4,
            channels: 4,
            ..Default::default()
        };
        (
            Autoencoder::init(&ahp, T, D, seed).unwrap(),
            Classifier::init(&ClassifierHp::default(), T, D, seed + 1).unwrap(),
        )
    }

    fn random_frames(rng: &mut ChaCha8Rng) -> Frames {
        Frames::new(T, D, (0..T * D).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn sample(id: &str, frames: Frames) -> MotionSample {
        MotionSample {
            id: id.into(),
            stroke_type: StrokeType::ForehandClear,
            label: None,
            frames,
        }
    }

    fn entry_prob(x: &Frames, ae: &Autoencoder, c: &Classifier) -> [f64; 2] {
        c.predict_proba(&ae.decode(&ae.encode(x).unwrap()).unwrap()).unwrap()
    }

    #[test]
    fn guard_holds_at_entry() {
        let (ae, c) = models(1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let x = random_frames(&mut rng);
            let p = entry_prob(&x, &ae, &c);
            let params = CFParams {
                target: argmax(p),
                ..Default::default()
            };
            let r = latent_cf(&x, &params, &ae, &c).unwrap();
            assert_eq!(r.iterations, 0);
            assert_eq!(r.loss_trace.len(), 1);
            assert_eq!(r.counterfactual, ae.decode(&ae.encode(&x).unwrap()).unwrap());
            assert!(r.valid);
        }
    }

    #[test]
    fn zero_budget() {
        let (ae, c) = models(3);
        let x = random_frames(&mut ChaCha8Rng::seed_from_u64(4));
        let p = entry_prob(&x, &ae, &c);
        for target in StrokeQuality::ALL {
            let params = CFParams {
                target,
                max_iter: 0,
                ..Default::default()
            };
            let r = latent_cf(&x, &params, &ae, &c).unwrap();
            assert_eq!(r.iterations, 0);
            assert_eq!(r.final_prob, p[target.index()]);
            assert_eq!(r.valid, p[target.index()] >= 0.5);
        }
    }

    fn trained() -> (Autoencoder, Classifier, Vec<MotionSample>) {
        use crate::dataset::{generate_synthetic, Normalization, SynthConfig};
        use crate::models::{train_autoencoder, train_classifier, TrainHp};
        let ds = generate_synthetic(&SynthConfig {
            n_per_class: 20,
            frames: T,
            joints: D / 3,
            ..Default::default()
        })
        .unwrap();
        let norm = Normalization::fit(&ds.samples).unwrap();
        let ds = norm.apply_dataset(&ds).unwrap();
        let train = TrainHp {
            epochs: 30,
            learning_rate: 1e-2,
            ..Default::default()
        };
        let (c, _) = train_classifier(
            &ds.samples,
            None,
            &ClassifierHp {
                train,
                ..Default::default()
            },
        )
        .unwrap();
        let ahp = AutoencoderHp {
            latent_dim: 4,
            channels: 4,
            train,
            ..Default::default()
        };
        let (ae, _) = train_autoencoder(&ds.samples, None, &ahp).unwrap();
        (ae, c, ds.samples)
    }

    #[test]
    fn search_contract() {
        let (ae, c, samples) = trained();
        let mut seen = [false; 2];
        for (i, s) in samples.iter().enumerate().step_by(3) {
            let x = &s.frames;
            let target = argmax(entry_prob(x, &ae, &c)).opposite();
            let max_iter = if i % 2 == 0 { 1 } else { 500 };
            let params = CFParams {
                target,
                max_iter,
                ..Default::default()
            };
            let r = latent_cf(x, &params, &ae, &c).unwrap();
            seen[r.valid as usize] = true;
            assert!(r.iterations <= max_iter);
            assert_eq!(r.loss_trace.len(), r.iterations + 1);
            let recheck = c.predict_proba(&r.counterfactual).unwrap()[target.index()];
            assert_eq!(r.final_prob, recheck);
            assert_eq!(r.valid, recheck >= params.tau);
            // single-sample cross-entropy is -ln p(target), so the returned
            // iterate pins down where the trace must end or bottom out
            let min_loss = r.loss_trace.iter().map(|&(_, l)| l).fold(f64::INFINITY, f64::min);
            let last = r.loss_trace.last().unwrap().1;
            if r.valid {
                assert!(last <= -params.tau.ln() + 1e-12);
            } else {
                assert!((r.final_prob - (-min_loss).exp()).abs() < 1e-12);
            }
            assert_eq!(r, latent_cf(x, &params, &ae, &c).unwrap());
        }
        assert_eq!(seen, [true, true], "both converged and exhausted searches exercised");
    }

    #[test]
    fn invalid_params_rejected() {
        let (ae, c) = models(1);
        let x = Frames::zeros(T, D);
        for p in [
            CFParams {
                tau: 1.0,
                ..Default::default()
            },
            CFParams {
                learning_rate: 0.0,
                ..Default::default()
            },
        ] {
            assert!(matches!(latent_cf(&x, &p, &ae, &c), Err(Error::Config(_))));
        }
    }

    fn brute_force(
        x: &Frames,
        reference: &[MotionSample],
        c: &Classifier,
        target: StrokeQuality,
        d: Distance,
    ) -> String {
        let mut best: Option<(f64, &str)> = None;
        for s in reference {
            if c.predict(&s.frames).unwrap() != target {
                continue;
            }
            let dist = d.between(x, &s.frames).unwrap();
            let better = match best {
                None => true,
                Some((bd, bid)) => dist < bd || (dist == bd && s.id.as_str() < bid),
            };
            if better {
                best = Some((dist, &s.id));
            }
        }
        best.unwrap().1.to_string()
    }

    #[test]
    fn nn_matches_exhaustive_scan() {
        let (_, c) = models(7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let reference: Vec<MotionSample> = (0..10)
            .map(|i| sample(&format!("r{i}"), random_frames(&mut rng)))
            .collect();
        for _ in 0..10 {
            let x = random_frames(&mut rng);
            for target in StrokeQuality::ALL {
                if !reference.iter().any(|s| c.predict(&s.frames).unwrap() == target) {
                    continue;
                }
                for d in [Distance::L1, Distance::L2, Distance::Dtw] {
                    let r = nn_cf(&x, target, d, &reference, &c).unwrap();
                    assert_eq!(r.neighbor_id.unwrap(), brute_force(&x, &reference, &c, target, d));
                    assert!(r.valid);
                }
            }
        }
    }

    #[test]
    fn nn_self_and_ties() {
        let (_, c) = models(9);
        let x = random_frames(&mut ChaCha8Rng::seed_from_u64(10));
        let target = c.predict(&x).unwrap();
        let reference = vec![sample("b", x.clone()), sample("a", x.clone())];
        let r = nn_cf(&x, target, Distance::L1, &reference, &c).unwrap();
        assert_eq!(r.neighbor_id.as_deref(), Some("a"));
        assert_eq!(r.counterfactual, x);
        assert!(matches!(
            nn_cf(&x, target.opposite(), Distance::L2, &reference, &c),
            Err(Error::NoCandidate { .. })
        ));
    }

    #[test]
    fn batch_is_transparent() {
        let (ae, c) = models(11);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let inputs: Vec<MotionSample> = (0..3)
            .map(|i| sample(&format!("q{i}"), random_frames(&mut rng)))
            .collect();
        let reference: Vec<MotionSample> = (0..6)
            .map(|i| sample(&format!("r{i}"), random_frames(&mut rng)))
            .collect();
        let params = CFParams {
            max_iter: 20,
            ..Default::default()
        };
        assert!(batch_explain(&[], Method::Latent, &params, &ae, &c, &reference).is_empty());
        let batch = batch_explain(&inputs, Method::Latent, &params, &ae, &c, &reference);
        for (s, e) in inputs.iter().zip(&batch) {
            assert_eq!(e.id, s.id);
            let single = latent_cf(&s.frames, &params, &ae, &c).unwrap();
            assert_eq!(e.result.as_ref().unwrap(), &single);
        }
        let one = batch_explain(&inputs[..1], Method::NnDtw, &params, &ae, &c, &reference);
        match (
            &one[0].result,
            nn_cf(&inputs[0].frames, params.target, Distance::Dtw, &reference, &c),
        ) {
            (Ok(a), Ok(b)) => assert_eq!(a, &b),
            (Err(_), Err(_)) => {}
            other => panic!("batch and single call disagree: {other:?}"),
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("nn-cosine".parse::<Method>().is_err());
    }
}
