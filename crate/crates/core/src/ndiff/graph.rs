//! Tape-based reverse-mode differentiation.
//!
//! Every op evaluates eagerly and appends a node to the tape. Nodes only
//! reference earlier nodes, so the tape is topologically ordered by
//! construction and [`Graph::backward`] is a single reverse sweep.

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Probability floor applied inside [`Graph::cross_entropy`].
pub const PROB_FLOOR: f64 = 1e-12;

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(Var, Var),
    Mul(Var, Var),
    Square(Var),
    Sum(Var),
    Dense {
        input: Var,
        weight: Var,
        bias: Var,
    },
    Conv1d {
        input: Var,
        weight: Var,
        bias: Var,
        stride: usize,
        padding: usize,
    },
    Relu(Var),
    Tanh(Var),
    Softmax(Var),
    MeanPool {
        input: Var,
        window: usize,
    },
    Upsample {
        input: Var,
        factor: usize,
    },
    Reshape(Var),
    CrossEntropy {
        probs: Var,
        targets: Vec<usize>,
    },
    Mse(Var, Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// A recorded computation.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    floor_events: usize,
}

/// Gradients produced by [`Graph::backward`], indexed by node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, var: Var) -> Option<Tensor> {
        self.grads.get_mut(var.0).and_then(|g| g.take())
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of cross-entropy entries that hit [`PROB_FLOOR`].
    pub fn floor_events(&self) -> usize {
        self.floor_events
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn check(&self, var: Var) -> Result<()> {
        if var.0 >= self.nodes.len() {
            return Err(Error::shape(
                "graph",
                format!("node index < {}", self.nodes.len()),
                var.0,
            ));
        }
        Ok(())
    }

    fn shape_of(&self, var: Var) -> &[usize] {
        self.nodes[var.0].value.shape()
    }

    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let va = self.value(a);
        let vb = self.value(b);
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| x + y).collect();
        let out = Tensor::new(va.shape().to_vec(), data)?;
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let va = self.value(a);
        let vb = self.value(b);
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| x * y).collect();
        let out = Tensor::new(va.shape().to_vec(), data)?;
        Ok(self.push(out, Op::Mul(a, b)))
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.check(a)?;
        let out = self.value(a).map(|x| x * x);
        Ok(self.push(out, Op::Square(a)))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.check(a)?;
        let s = self.value(a).data().iter().sum();
        Ok(self.push(Tensor::scalar(s), Op::Sum(a)))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        self.check(a)?;
        self.check(b)?;
        if self.shape_of(a) != self.shape_of(b) {
            return Err(Error::shape(
                op,
                format!("{:?}", self.shape_of(a)),
                format!("{:?}", self.shape_of(b)),
            ));
        }
        Ok(())
    }

    /// `input [B, in] · weightᵀ [out, in] + bias [out] -> [B, out]`
    pub fn dense(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        self.check(input)?;
        self.check(weight)?;
        self.check(bias)?;
        let (xs, ws, bs) = (self.shape_of(input), self.shape_of(weight), self.shape_of(bias));
        if ws.len() != 2 {
            return Err(Error::shape("dense", "weight [out, in]", format!("{ws:?}")));
        }
        let (n_out, n_in) = (ws[0], ws[1]);
        if xs.len() != 2 || xs[1] != n_in {
            return Err(Error::shape("dense", format!("input [B, {n_in}]"), format!("{xs:?}")));
        }
        if bs != [n_out] {
            return Err(Error::shape("dense", format!("bias [{n_out}]"), format!("{bs:?}")));
        }
        let batch = xs[0];
        let x = self.value(input).data();
        let w = self.value(weight).data();
        let b = self.value(bias).data();
        let mut out = vec![0.0; batch * n_out];
        for bi in 0..batch {
            let row = &x[bi * n_in..(bi + 1) * n_in];
            for o in 0..n_out {
                let wrow = &w[o * n_in..(o + 1) * n_in];
                out[bi * n_out + o] = b[o] + dot(row, wrow);
            }
        }
        let out = Tensor::new(vec![batch, n_out], out)?;
        Ok(self.push(out, Op::Dense { input, weight, bias }))
    }

    /// Cross-correlation over time with zero padding.
    ///
    /// `input [B, Cin, T]`, `weight [Cout, Cin, K]`, `bias [Cout]` ->
    /// `[B, Cout, (T + 2·padding − K) / stride + 1]`.
    pub fn conv1d(&mut self, input: Var, weight: Var, bias: Var, stride: usize, padding: usize) -> Result<Var> {
        self.check(input)?;
        self.check(weight)?;
        self.check(bias)?;
        let (xs, ws, bs) = (self.shape_of(input), self.shape_of(weight), self.shape_of(bias));
        if ws.len() != 3 {
            return Err(Error::shape("conv1d", "weight [Cout, Cin, K]", format!("{ws:?}")));
        }
        let (c_out, c_in, k) = (ws[0], ws[1], ws[2]);
        if xs.len() != 3 || xs[1] != c_in {
            return Err(Error::shape(
                "conv1d",
                format!("input [B, {c_in}, T]"),
                format!("{xs:?}"),
            ));
        }
        if bs != [c_out] {
            return Err(Error::shape("conv1d", format!("bias [{c_out}]"), format!("{bs:?}")));
        }
        if stride == 0 {
            return Err(Error::shape("conv1d", "stride >= 1", 0));
        }
        let (batch, t_in) = (xs[0], xs[2]);
        if t_in + 2 * padding < k {
            return Err(Error::shape(
                "conv1d",
                format!("padded length >= kernel {k}"),
                t_in + 2 * padding,
            ));
        }
        let t_out = (t_in + 2 * padding - k) / stride + 1;
        let x = self.value(input).data();
        let w = self.value(weight).data();
        let b = self.value(bias).data();
        let mut out = vec![0.0; batch * c_out * t_out];
        for bi in 0..batch {
            for o in 0..c_out {
                let dst = &mut out[(bi * c_out + o) * t_out..(bi * c_out + o + 1) * t_out];
                dst.iter_mut().for_each(|v| *v = b[o]);
                for c in 0..c_in {
                    let src = &x[(bi * c_in + c) * t_in..(bi * c_in + c + 1) * t_in];
                    let kern = &w[(o * c_in + c) * k..(o * c_in + c + 1) * k];
                    for (t, d) in dst.iter_mut().enumerate() {
                        let start = (t * stride) as isize - padding as isize;
                        let mut acc = 0.0;
                        for (j, kv) in kern.iter().enumerate() {
                            let pos = start + j as isize;
                            if pos >= 0 && (pos as usize) < t_in {
                                acc += kv * src[pos as usize];
                            }
                        }
                        *d += acc;
                    }
                }
            }
        }
        let out = Tensor::new(vec![batch, c_out, t_out], out)?;
        Ok(self.push(
            out,
            Op::Conv1d {
                input,
                weight,
                bias,
                stride,
                padding,
            },
        ))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.check(a)?;
        let out = self.value(a).map(|x| x.max(0.0));
        Ok(self.push(out, Op::Relu(a)))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.check(a)?;
        let out = self.value(a).map(f64::tanh);
        Ok(self.push(out, Op::Tanh(a)))
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        self.check(a)?;
        let v = self.value(a);
        let k = *v
            .shape()
            .last()
            .ok_or_else(|| Error::shape("softmax", "rank >= 1", "scalar"))?;
        if k == 0 {
            return Err(Error::shape("softmax", "non-empty last axis", 0));
        }
        let mut out = v.data().to_vec();
        for row in out.chunks_mut(k) {
            softmax_in_place(row);
        }
        let out = Tensor::new(v.shape().to_vec(), out)?;
        Ok(self.push(out, Op::Softmax(a)))
    }

    /// Mean over non-overlapping windows of the last axis of `[B, C, T]`.
    ///
    /// `window = None` averages the whole axis and drops it, giving `[B, C]`.
    pub fn mean_pool(&mut self, a: Var, window: Option<usize>) -> Result<Var> {
        self.check(a)?;
        let s = self.shape_of(a);
        if s.len() != 3 {
            return Err(Error::shape("mean_pool", "input [B, C, T]", format!("{s:?}")));
        }
        let (batch, ch, t) = (s[0], s[1], s[2]);
        let (w, global) = match window {
            None => (t, true),
            Some(w) => (w, false),
        };
        if w == 0 || t % w != 0 {
            return Err(Error::shape("mean_pool", format!("window dividing length {t}"), w));
        }
        let t_out = t / w;
        let x = self.value(a).data();
        let out: Vec<f64> = x.chunks(w).map(|c| c.iter().sum::<f64>() / w as f64).collect();
        let shape = if global {
            vec![batch, ch]
        } else {
            vec![batch, ch, t_out]
        };
        let out = Tensor::new(shape, out)?;
        Ok(self.push(out, Op::MeanPool { input: a, window: w }))
    }

    /// Nearest-neighbour upsampling of the last axis of `[B, C, T]`.
    pub fn upsample(&mut self, a: Var, factor: usize) -> Result<Var> {
        self.check(a)?;
        let s = self.shape_of(a).to_vec();
        if s.len() != 3 || factor == 0 {
            return Err(Error::shape(
                "upsample",
                "input [B, C, T], factor >= 1",
                format!("{s:?}, factor {factor}"),
            ));
        }
        let x = self.value(a).data();
        let mut out = Vec::with_capacity(x.len() * factor);
        for &v in x {
            out.extend(std::iter::repeat_n(v, factor));
        }
        let out = Tensor::new(vec![s[0], s[1], s[2] * factor], out)?;
        Ok(self.push(out, Op::Upsample { input: a, factor }))
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        self.check(a)?;
        let out = self.value(a).clone().reshape(shape)?;
        Ok(self.push(out, Op::Reshape(a)))
    }

    /// Mean over the batch of `−ln p[b, target_b]`, with `p` floored at
    /// [`PROB_FLOOR`]. Floor hits are counted in [`Graph::floor_events`].
    ///
    /// When `probs` is a softmax node the gradient is routed straight to the
    /// logits as `(p − onehot) / B`, which stays informative even when the
    /// target probability is tiny.
    pub fn cross_entropy(&mut self, probs: Var, targets: &[usize]) -> Result<Var> {
        self.check(probs)?;
        let s = self.shape_of(probs);
        if s.len() != 2 || s[0] != targets.len() {
            return Err(Error::shape(
                "cross_entropy",
                format!("probabilities [{}, K]", targets.len()),
                format!("{s:?}"),
            ));
        }
        let k = s[1];
        if let Some(&bad) = targets.iter().find(|&&t| t >= k) {
            return Err(Error::shape("cross_entropy", format!("target < {k}"), bad));
        }
        let p = self.value(probs).data();
        let mut loss = 0.0;
        let mut floored = 0;
        for (b, &t) in targets.iter().enumerate() {
            let pt = p[b * k + t];
            if pt < PROB_FLOOR {
                floored += 1;
            }
            loss -= pt.max(PROB_FLOOR).ln();
        }
        loss /= targets.len().max(1) as f64;
        self.floor_events += floored;
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                probs,
                targets: targets.to_vec(),
            },
        ))
    }

    /// Mean squared difference of two same-shape tensors.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mse", a, b)?;
        let va = self.value(a).data();
        let vb = self.value(b).data();
        let n = va.len().max(1) as f64;
        let s: f64 = va.iter().zip(vb).map(|(x, y)| (x - y) * (x - y)).sum();
        Ok(self.push(Tensor::scalar(s / n), Op::Mse(a, b)))
    }

    /// Reverse sweep from a scalar output.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        self.check(output)?;
        if !self.value(output).is_scalar() {
            return Err(Error::shape(
                "backward",
                "scalar output",
                format!("{:?}", self.shape_of(output)),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; output.0 + 1];
        let mut seed = Tensor::zeros(self.shape_of(output).to_vec());
        seed.fill(1.0);
        grads[output.0] = Some(seed);

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            self.propagate(&node.op, &node.value, &g, &mut grads)?;
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, op: &Op, out: &Tensor, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let mut acc = |var: Var, delta: Tensor| -> Result<()> {
            if var.0 >= grads.len() {
                return Err(Error::shape("backward", "acyclic tape", "forward reference"));
            }
            match &mut grads[var.0] {
                Some(existing) => existing.add_assign(&delta),
                slot @ None => *slot = Some(delta),
            }
            Ok(())
        };
        match op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                acc(*a, g.clone())?;
                acc(*b, g.clone())?;
            }
            Op::Mul(a, b) => {
                let va = self.value(*a);
                let vb = self.value(*b);
                let ga = zip_map(g, vb, |gi, y| gi * y);
                let gb = zip_map(g, va, |gi, x| gi * x);
                acc(*a, ga)?;
                acc(*b, gb)?;
            }
            Op::Square(a) => {
                let va = self.value(*a);
                acc(*a, zip_map(g, va, |gi, x| 2.0 * x * gi))?;
            }
            Op::Sum(a) => {
                let mut d = Tensor::zeros(self.shape_of(*a).to_vec());
                d.fill(g.item());
                acc(*a, d)?;
            }
            Op::Dense { input, weight, bias } => {
                let x = self.value(*input);
                let w = self.value(*weight);
                let (batch, n_in) = (x.shape()[0], x.shape()[1]);
                let n_out = w.shape()[0];
                let (xd, wd, gd) = (x.data(), w.data(), g.data());
                let mut gx = vec![0.0; batch * n_in];
                let mut gw = vec![0.0; n_out * n_in];
                let mut gb = vec![0.0; n_out];
                for bi in 0..batch {
                    let xrow = &xd[bi * n_in..(bi + 1) * n_in];
                    let gxrow = &mut gx[bi * n_in..(bi + 1) * n_in];
                    for o in 0..n_out {
                        let go = gd[bi * n_out + o];
                        if go == 0.0 {
                            continue;
                        }
                        gb[o] += go;
                        let wrow = &wd[o * n_in..(o + 1) * n_in];
                        let gwrow = &mut gw[o * n_in..(o + 1) * n_in];
                        for i in 0..n_in {
                            gxrow[i] += go * wrow[i];
                            gwrow[i] += go * xrow[i];
                        }
                    }
                }
                acc(*input, Tensor::new(x.shape().to_vec(), gx)?)?;
                acc(*weight, Tensor::new(w.shape().to_vec(), gw)?)?;
                acc(*bias, Tensor::new(vec![n_out], gb)?)?;
            }
            Op::Conv1d {
                input,
                weight,
                bias,
                stride,
                padding,
            } => {
                let x = self.value(*input);
                let w = self.value(*weight);
                let (batch, c_in, t_in) = (x.shape()[0], x.shape()[1], x.shape()[2]);
                let (c_out, k) = (w.shape()[0], w.shape()[2]);
                let t_out = out.shape()[2];
                let (xd, wd, gd) = (x.data(), w.data(), g.data());
                let mut gx = vec![0.0; xd.len()];
                let mut gw = vec![0.0; wd.len()];
                let mut gb = vec![0.0; c_out];
                for bi in 0..batch {
                    for o in 0..c_out {
                        let gout = &gd[(bi * c_out + o) * t_out..(bi * c_out + o + 1) * t_out];
                        gb[o] += gout.iter().sum::<f64>();
                        for c in 0..c_in {
                            let base_x = (bi * c_in + c) * t_in;
                            let base_w = (o * c_in + c) * k;
                            for (t, &go) in gout.iter().enumerate() {
                                if go == 0.0 {
                                    continue;
                                }
                                let start = (t * stride) as isize - *padding as isize;
                                for j in 0..k {
                                    let pos = start + j as isize;
                                    if pos >= 0 && (pos as usize) < t_in {
                                        let p = base_x + pos as usize;
                                        gx[p] += go * wd[base_w + j];
                                        gw[base_w + j] += go * xd[p];
                                    }
                                }
                            }
                        }
                    }
                }
                acc(*input, Tensor::new(x.shape().to_vec(), gx)?)?;
                acc(*weight, Tensor::new(w.shape().to_vec(), gw)?)?;
                acc(*bias, Tensor::new(vec![c_out], gb)?)?;
            }
            Op::Relu(a) => {
                let va = self.value(*a);
                acc(*a, zip_map(g, va, |gi, x| if x > 0.0 { gi } else { 0.0 }))?;
            }
            Op::Tanh(a) => {
                acc(*a, zip_map(g, out, |gi, y| gi * (1.0 - y * y)))?;
            }
            Op::Softmax(a) => {
                let k = *out.shape().last().unwrap_or(&1);
                let mut d = Vec::with_capacity(out.len());
                for (yrow, grow) in out.data().chunks(k).zip(g.data().chunks(k)) {
                    let s: f64 = yrow.iter().zip(grow).map(|(y, gi)| y * gi).sum();
                    d.extend(yrow.iter().zip(grow).map(|(y, gi)| y * (gi - s)));
                }
                acc(*a, Tensor::new(out.shape().to_vec(), d)?)?;
            }
            Op::MeanPool { input, window } => {
                let w = *window;
                let scale = 1.0 / w as f64;
                let mut d = Vec::with_capacity(g.len() * w);
                for &gi in g.data() {
                    d.extend(std::iter::repeat_n(gi * scale, w));
                }
                acc(*input, Tensor::new(self.shape_of(*input).to_vec(), d)?)?;
            }
            Op::Upsample { input, factor } => {
                let d: Vec<f64> = g.data().chunks(*factor).map(|c| c.iter().sum()).collect();
                acc(*input, Tensor::new(self.shape_of(*input).to_vec(), d)?)?;
            }
            Op::Reshape(a) => {
                acc(*a, g.clone().reshape(self.shape_of(*a).to_vec())?)?;
            }
            Op::CrossEntropy { probs, targets } => {
                let p = self.value(*probs);
                let k = p.shape()[1];
                let n = targets.len().max(1) as f64;
                let scale = g.item() / n;
                match &self.nodes[probs.0].op {
                    Op::Softmax(logits) => {
                        let mut d = p.data().to_vec();
                        for (b, &t) in targets.iter().enumerate() {
                            d[b * k + t] -= 1.0;
                        }
                        d.iter_mut().for_each(|v| *v *= scale);
                        acc(*logits, Tensor::new(p.shape().to_vec(), d)?)?;
                    }
                    _ => {
                        let mut d = vec![0.0; p.len()];
                        for (b, &t) in targets.iter().enumerate() {
                            d[b * k + t] = -scale / p.data()[b * k + t].max(PROB_FLOOR);
                        }
                        acc(*probs, Tensor::new(p.shape().to_vec(), d)?)?;
                    }
                }
            }
            Op::Mse(a, b) => {
                let va = self.value(*a);
                let vb = self.value(*b);
                let scale = 2.0 * g.item() / va.len().max(1) as f64;
                let ga = zip_map(va, vb, |x, y| scale * (x - y));
                let gb = ga.map(|v| -v);
                acc(*a, ga)?;
                acc(*b, gb)?;
            }
        }
        Ok(())
    }
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("same length")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(3.0));
        let y = g.square(x).unwrap();
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.get(x).unwrap().item(), 6.0);
    }

    #[test]
    fn inactive_relu_has_zero_gradient() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(-1.0));
        let y = g.relu(x).unwrap();
        let s = g.sum(y).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(x).unwrap().item(), 0.0);
    }

    #[test]
    fn cross_entropy_values() {
        let cases = [
            (vec![0.5, 0.5], 1, std::f64::consts::LN_2),
            (vec![1.0, 0.0], 0, 0.0),
            (vec![0.25, 0.75], 0, 1.386_294_361_119_890_6),
        ];
        for (p, t, expected) in cases {
            let mut g = Graph::new();
            let pv = g.leaf(Tensor::new(vec![1, 2], p).unwrap());
            let l = g.cross_entropy(pv, &[t]).unwrap();
            assert!((g.value(l).item() - expected).abs() < 1e-6);
            assert_eq!(g.floor_events(), 0);
        }
    }

    #[test]
    fn cross_entropy_floor_is_flagged() {
        let mut g = Graph::new();
        let pv = g.leaf(Tensor::new(vec![1, 2], vec![1.0, 0.0]).unwrap());
        let l = g.cross_entropy(pv, &[1]).unwrap();
        assert!((g.value(l).item() + PROB_FLOOR.ln()).abs() < 1e-12);
        assert_eq!(g.floor_events(), 1);
    }

    #[test]
    fn conv1d_hand_case() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::new(vec![1, 1, 3], vec![1.0, 2.0, 3.0]).unwrap());
        let w = g.leaf(Tensor::new(vec![1, 1, 2], vec![1.0, 1.0]).unwrap());
        let b = g.leaf(Tensor::zeros(vec![1]));
        let y = g.conv1d(x, w, b, 1, 0).unwrap();
        assert_eq!(g.value(y).data(), &[3.0, 5.0]);
    }

    #[test]
    fn conv1d_delta_kernel_is_identity() {
        let mut g = Graph::new();
        let data = vec![0.3, -1.2, 4.0, 2.5];
        let x = g.leaf(Tensor::new(vec![1, 1, 4], data.clone()).unwrap());
        let w = g.leaf(Tensor::new(vec![1, 1, 1], vec![1.0]).unwrap());
        let b = g.leaf(Tensor::zeros(vec![1]));
        let y = g.conv1d(x, w, b, 1, 0).unwrap();
        assert_eq!(g.value(y).data(), data.as_slice());
    }

    #[test]
    fn conv1d_stride_and_padding_shape() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::zeros(vec![2, 3, 10]));
        let w = g.leaf(Tensor::zeros(vec![4, 3, 5]));
        let b = g.leaf(Tensor::zeros(vec![4]));
        let y = g.conv1d(x, w, b, 2, 2).unwrap();
        assert_eq!(g.value(y).shape(), &[2, 4, 5]);
    }

    #[test]
    fn dense_identity() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::new(vec![1, 3], vec![1.5, -2.0, 0.25]).unwrap());
        let mut eye = Tensor::zeros(vec![3, 3]);
        for i in 0..3 {
            eye.data_mut()[i * 3 + i] = 1.0;
        }
        let w = g.leaf(eye);
        let b = g.leaf(Tensor::zeros(vec![3]));
        let y = g.dense(x, w, b).unwrap();
        assert_eq!(g.value(y).data(), &[1.5, -2.0, 0.25]);
    }

    #[test]
    fn dense_shape_mismatch_names_shapes() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::zeros(vec![1, 4]));
        let w = g.leaf(Tensor::zeros(vec![2, 3]));
        let b = g.leaf(Tensor::zeros(vec![2]));
        let err = g.dense(x, w, b).unwrap_err().to_string();
        assert!(err.contains("[B, 3]") && err.contains("[1, 4]"), "{err}");
    }

    #[test]
    fn backward_requires_scalar() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::zeros(vec![2]));
        assert!(matches!(g.backward(x), Err(Error::Structure { .. })));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, -50.0, 0.0, 50.0]).unwrap());
        let y = g.softmax(x).unwrap();
        for row in g.value(y).data().chunks(3) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&p| p > 0.0));
        }
    }

    #[test]
    fn fused_softmax_cross_entropy_gradient() {
        let mut g = Graph::new();
        let z = g.leaf(Tensor::new(vec![1, 2], vec![0.0, 0.0]).unwrap());
        let p = g.softmax(z).unwrap();
        let l = g.cross_entropy(p, &[1]).unwrap();
        let grads = g.backward(l).unwrap();
        assert_eq!(grads.get(z).unwrap().data(), &[0.5, -0.5]);
    }
}
