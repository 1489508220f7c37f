//! Plausibility detectors fitted on target-class reference samples. Every
//! raw score is oriented so that larger means more outlying, then min-max
//! calibrated against the reference set's own scores and clamped to [0, 1].

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::MotionSample;
use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutlierConfig {
    /// Upper bound on the LOF neighbourhood; the fitted k is `min(lof_k, n - 1)`.
    pub lof_k: usize,
    pub if_trees: usize,
    /// Upper bound on the isolation-forest subsample size.
    pub if_subsample: usize,
    pub ocsvm_nu: f64,
    pub ocsvm_iters: usize,
    pub seed: u64,
}

impl Default for OutlierConfig {
    fn default() -> Self {
        OutlierConfig {
            lof_k: 20,
            if_trees: 100,
            if_subsample: 256,
            ocsvm_nu: 0.1,
            ocsvm_iters: 1000,
            seed: 0,
        }
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// Local outlier factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lof {
    pub k: usize,
    points: Vec<Vec<f64>>,
    k_distance: Vec<f64>,
    lrd: Vec<f64>,
}

impl Lof {
    pub fn fit(points: &[Vec<f64>], k: usize) -> Result<Self> {
        if k == 0 || points.len() <= k {
            return Err(Error::TooFewSamples(format!(
                "LOF with k={k} needs more than {k} points, got {}",
                points.len()
            )));
        }
        let n = points.len();
        let neighbours: Vec<Vec<(f64, usize)>> = (0..n).map(|i| knn(points, &points[i], k, Some(i))).collect();
        let k_distance: Vec<f64> = neighbours.iter().map(|nb| nb[k - 1].0).collect();
        let lrd = neighbours
            .iter()
            .map(|nb| local_reachability(nb, &k_distance))
            .collect();
        Ok(Lof {
            k,
            points: points.to_vec(),
            k_distance,
            lrd,
        })
    }

    fn score_neighbours(&self, nb: &[(f64, usize)]) -> f64 {
        let lrd_q = local_reachability(nb, &self.k_distance);
        nb.iter().map(|&(_, o)| self.lrd[o]).sum::<f64>() / (nb.len() as f64 * lrd_q)
    }

    pub fn score(&self, q: &[f64]) -> f64 {
        self.score_neighbours(&knn(&self.points, q, self.k, None))
    }

    /// Scores of the fitted points, each computed without itself.
    pub fn reference_scores(&self) -> Vec<f64> {
        (0..self.points.len())
            .map(|i| self.score_neighbours(&knn(&self.points, &self.points[i], self.k, Some(i))))
            .collect()
    }
}

/// `k` nearest points as (distance, index), ties by index.
fn knn(points: &[Vec<f64>], q: &[f64], k: usize, exclude: Option<usize>) -> Vec<(f64, usize)> {
    let mut d: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|&(i, _)| Some(i) != exclude)
        .map(|(i, p)| (euclidean(p, q), i))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.truncate(k);
    d
}

fn local_reachability(nb: &[(f64, usize)], k_distance: &[f64]) -> f64 {
    let mean_reach = nb.iter().map(|&(d, o)| d.max(k_distance[o])).sum::<f64>() / nb.len() as f64;
    // exact duplicates can make every reach distance zero
    1.0 / mean_reach.max(1e-12)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf {
        size: usize,
    },
    Split {
        feature: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Average path length of an unsuccessful binary-search-tree lookup among `n` points.
pub fn average_path_length(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let m = (n - 1) as f64;
            2.0 * (m.ln() + EULER_GAMMA) - 2.0 * m / n as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationForest {
    pub subsample: usize,
    trees: Vec<Vec<Node>>,
}

impl IsolationForest {
    pub fn fit(points: &[Vec<f64>], n_trees: usize, max_subsample: usize, seed: u64) -> Result<Self> {
        if points.is_empty() || n_trees == 0 || max_subsample == 0 {
            return Err(Error::TooFewSamples(
                "isolation forest needs points, trees and a subsample".into(),
            ));
        }
        let psi = max_subsample.min(points.len());
        let limit = (psi as f64).log2().ceil() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trees = (0..n_trees)
            .map(|_| {
                let idx = sample(&mut rng, points.len(), psi).into_vec();
                let mut nodes = Vec::new();
                grow(points, idx, 0, limit, &mut nodes, &mut rng);
                nodes
            })
            .collect();
        Ok(IsolationForest { subsample: psi, trees })
    }

    pub fn mean_path_length(&self, q: &[f64]) -> f64 {
        let total: f64 = self.trees.iter().map(|t| path_length(t, q)).sum();
        total / self.trees.len() as f64
    }

    /// `2^(-E[h(q)] / c(ψ))`, in (0, 1].
    pub fn score(&self, q: &[f64]) -> f64 {
        let c = average_path_length(self.subsample);
        if c == 0.0 {
            return 0.5;
        }
        2f64.powf(-self.mean_path_length(q) / c)
    }
}

fn grow(
    points: &[Vec<f64>],
    idx: Vec<usize>,
    depth: usize,
    limit: usize,
    nodes: &mut Vec<Node>,
    rng: &mut ChaCha8Rng,
) -> usize {
    let id = nodes.len();
    nodes.push(Node::Leaf { size: idx.len() });
    if depth >= limit || idx.len() <= 1 {
        return id;
    }
    let dim = points[idx[0]].len();
    let ranges: Vec<(usize, f64, f64)> = (0..dim)
        .filter_map(|f| {
            let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                (lo.min(points[i][f]), hi.max(points[i][f]))
            });
            (hi > lo).then_some((f, lo, hi))
        })
        .collect();
    if ranges.is_empty() {
        return id;
    }
    let (feature, lo, hi) = ranges[rng.random_range(0..ranges.len())];
    let value = lo + rng.random::<f64>() * (hi - lo);
    let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| points[i][feature] < value);
    let left = grow(points, l, depth + 1, limit, nodes, rng);
    let right = grow(points, r, depth + 1, limit, nodes, rng);
    nodes[id] = Node::Split {
        feature,
        value,
        left,
        right,
    };
    id
}

fn path_length(tree: &[Node], q: &[f64]) -> f64 {
    let mut node = 0;
    let mut depth = 0.0;
    loop {
        match tree[node] {
            Node::Leaf { size } => return depth + average_path_length(size),
            Node::Split {
                feature,
                value,
                left,
                right,
            } => {
                node = if q[feature] < value { left } else { right };
                depth += 1.0;
            }
        }
    }
}

/// One-class SVM with an RBF kernel, trained by projected gradient descent
/// on the dual `min ½ αᵀKα` s.t. `0 ≤ α ≤ 1/(νn)`, `Σα = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneClassSvm {
    pub gamma: f64,
    pub nu: f64,
    pub rho: f64,
    support: Vec<Vec<f64>>,
    alpha: Vec<f64>,
}

impl OneClassSvm {
    pub fn fit(points: &[Vec<f64>], nu: f64, iters: usize) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::TooFewSamples("OCSVM needs at least 2 points".into()));
        }
        if !(nu > 0.0 && nu <= 1.0) {
            return Err(Error::Config(format!("OCSVM nu must lie in (0, 1], got {nu}")));
        }
        let n = points.len();
        let dim = points[0].len();
        let all = points.iter().flatten();
        let count = (n * dim) as f64;
        let mean = all.clone().sum::<f64>() / count;
        let var = all.map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
        let gamma = if var > 0.0 { 1.0 / (dim as f64 * var) } else { 1.0 };

        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = rbf(gamma, &points[i], &points[j]);
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        let cap = 1.0 / (nu * n as f64);
        let step = 1.0 / largest_eigenvalue(&k, n);
        let mut alpha = vec![1.0 / n as f64; n];
        let mut ka = vec![0.0; n];
        for _ in 0..iters {
            matvec(&k, &alpha, &mut ka);
            let v: Vec<f64> = alpha.iter().zip(&ka).map(|(a, g)| a - step * g).collect();
            alpha = project_capped_simplex(&v, cap);
        }
        matvec(&k, &alpha, &mut ka);
        let tol = 1e-8 * cap;
        let free: Vec<f64> = (0..n)
            .filter(|&i| alpha[i] > tol && alpha[i] < cap - tol)
            .map(|i| ka[i])
            .collect();
        let rho = if free.is_empty() {
            let sv: Vec<f64> = (0..n).filter(|&i| alpha[i] > tol).map(|i| ka[i]).collect();
            sv.iter().sum::<f64>() / sv.len() as f64
        } else {
            free.iter().sum::<f64>() / free.len() as f64
        };
        let (support, alpha) = points
            .iter()
            .zip(alpha)
            .filter(|(_, a)| *a > 1e-12)
            .map(|(p, a)| (p.clone(), a))
            .unzip();
        Ok(OneClassSvm {
            gamma,
            nu,
            rho,
            support,
            alpha,
        })
    }

    /// `Σ αᵢ K(xᵢ, q) − ρ`; negative outside the learned region.
    pub fn decision(&self, q: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.alpha)
            .map(|(s, a)| a * rbf(self.gamma, s, q))
            .sum::<f64>()
            - self.rho
    }

    pub fn score(&self, q: &[f64]) -> f64 {
        -self.decision(q)
    }

    pub fn num_support(&self) -> usize {
        self.support.len()
    }
}

fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
    (-gamma * d2).exp()
}

fn matvec(k: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o = k[i * n..(i + 1) * n].iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

fn largest_eigenvalue(k: &[f64], n: usize) -> f64 {
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut w = vec![0.0; n];
    let mut lambda = 1.0;
    for _ in 0..100 {
        matvec(k, &v, &mut w);
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        lambda = norm;
        v.iter_mut().zip(&w).for_each(|(a, b)| *a = b / norm);
    }
    lambda.max(1e-12)
}

/// Euclidean projection onto `{α : 0 ≤ αᵢ ≤ cap, Σα = 1}` (bisection on the shift).
pub fn project_capped_simplex(v: &[f64], cap: f64) -> Vec<f64> {
    let mass = |theta: f64| v.iter().map(|x| (x - theta).clamp(0.0, cap)).sum::<f64>();
    let mut lo = v.iter().copied().fold(f64::INFINITY, f64::min) - cap;
    let mut hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    v.iter().map(|x| (x - theta).clamp(0.0, cap)).collect()
}

/// Min–max map from raw scores onto [0, 1], fitted on reference scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub min: f64,
    pub max: f64,
}

impl Calibration {
    pub fn fit(reference: &[f64]) -> Self {
        Calibration {
            min: reference.iter().copied().fold(f64::INFINITY, f64::min),
            max: reference.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn apply(&self, raw: f64) -> f64 {
        let range = self.max - self.min;
        if range > 0.0 {
            ((raw - self.min) / range).clamp(0.0, 1.0)
        } else if raw > self.max {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plausibility {
    pub lof: f64,
    pub iforest: f64,
    pub ocsvm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierModels {
    pub dim: usize,
    pub lof: Lof,
    pub iforest: IsolationForest,
    pub ocsvm: OneClassSvm,
    pub calibration: [Calibration; 3],
}

/// Fits all three detectors on flattened reference vectors.
pub fn fit_outlier_points(reference: &[Vec<f64>], cfg: &OutlierConfig) -> Result<OutlierModels> {
    let n = reference.len();
    if n < 2 {
        return Err(Error::TooFewSamples(format!(
            "outlier models need at least 2 reference samples, got {n}"
        )));
    }
    let dim = reference[0].len();
    if let Some(bad) = reference.iter().find(|p| p.len() != dim) {
        return Err(Error::shape("fit_outlier_models", dim, bad.len()));
    }
    let lof = Lof::fit(reference, cfg.lof_k.min(n - 1))?;
    let iforest = IsolationForest::fit(reference, cfg.if_trees, cfg.if_subsample, cfg.seed)?;
    let ocsvm = OneClassSvm::fit(reference, cfg.ocsvm_nu, cfg.ocsvm_iters)?;
    let calibration = [
        Calibration::fit(&lof.reference_scores()),
        Calibration::fit(&reference.iter().map(|p| iforest.score(p)).collect::<Vec<_>>()),
        Calibration::fit(&reference.iter().map(|p| ocsvm.score(p)).collect::<Vec<_>>()),
    ];
    Ok(OutlierModels {
        dim,
        lof,
        iforest,
        ocsvm,
        calibration,
    })
}

/// Fits the detectors on target-class samples, flattened to `T·D` vectors.
pub fn fit_outlier_models(reference: &[MotionSample], cfg: &OutlierConfig) -> Result<OutlierModels> {
    let points: Vec<Vec<f64>> = reference.iter().map(|s| s.frames.as_slice().to_vec()).collect();
    fit_outlier_points(&points, cfg)
}

impl OutlierModels {
    pub fn raw_scores(&self, x: &[f64]) -> Result<[f64; 3]> {
        if x.len() != self.dim {
            return Err(Error::shape("plausibility", self.dim, x.len()));
        }
        Ok([self.lof.score(x), self.iforest.score(x), self.ocsvm.score(x)])
    }
}

/// Calibrated scores in [0, 1]; lower is more plausible.
pub fn plausibility_scores(x: &[f64], models: &OutlierModels) -> Result<Plausibility> {
    let raw = models.raw_scores(x)?;
    let c = &models.calibration;
    Ok(Plausibility {
        lof: c[0].apply(raw[0]),
        iforest: c[1].apply(raw[1]),
        ocsvm: c[2].apply(raw[2]),
    })
}
