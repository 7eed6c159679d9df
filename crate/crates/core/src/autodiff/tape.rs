use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};

use super::tensor::{ce_from_logits, softmax_unchecked, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Primitive kinds exposed through [`Tape::apply_primitive`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrimitiveKind {
    Affine,
    Relu,
    Conv2d,
    MaxPool2x2,
    Flatten,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TapeMode {
    Recording,
    Frozen,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Affine {
        x: Var,
        w: Var,
        b: Var,
    },
    Relu {
        x: Var,
    },
    Conv2d {
        x: Var,
        k: Var,
        b: Var,
    },
    MaxPool2x2 {
        x: Var,
        winners: Vec<usize>,
    },
    Reshape {
        x: Var,
    },
    Sum {
        x: Var,
    },
    Mul {
        a: Var,
        b: Var,
    },
    Scale {
        x: Var,
        factor: f64,
    },
    SoftmaxCe {
        logits: Var,
        labels: Vec<usize>,
        probs: Vec<f64>,
        losses: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
    needs_grad: bool,
}

/// A per-computation Wengert list.
///
/// Nodes are appended in evaluation order, so every node's inputs precede it.
/// A single [`backward`](Tape::backward) call freezes the tape; further
/// recording or a second backward pass is a state error.
#[derive(Debug)]
pub struct Tape {
    nodes: Vec<Node>,
    mode: TapeMode,
}

/// Gradients of a scalar with respect to every leaf that requested one.
#[derive(Debug, Default)]
pub struct Gradients {
    grads: BTreeMap<Var, Tensor>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(&var)
    }

    pub fn remove(&mut self, var: Var) -> Option<Tensor> {
        self.grads.remove(&var)
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn into_map(self) -> BTreeMap<Var, Tensor> {
        self.grads
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            mode: TapeMode::Recording,
        }
    }

    pub fn mode(&self) -> TapeMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    fn push(&mut self, op: Op, value: Tensor, needs_grad: bool) -> Result<Var> {
        if self.mode == TapeMode::Frozen {
            return Err(Error::State("cannot record on a frozen tape".into()));
        }
        self.nodes.push(Node { op, value, needs_grad });
        Ok(Var(self.nodes.len() - 1))
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Records an input or parameter. Only leaves created with
    /// `requires_grad` receive a gradient from [`backward`](Tape::backward).
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Result<Var> {
        value.ensure_finite("leaf")?;
        self.push(Op::Leaf, value, requires_grad)
    }

    pub fn apply_primitive(&mut self, kind: PrimitiveKind, inputs: &[Var]) -> Result<Var> {
        let arity = match kind {
            PrimitiveKind::Affine | PrimitiveKind::Conv2d => 3,
            _ => 1,
        };
        if inputs.len() != arity {
            return Err(Error::Input(format!(
                "{kind:?} takes {arity} inputs, got {}",
                inputs.len()
            )));
        }
        match kind {
            PrimitiveKind::Affine => self.affine(inputs[0], inputs[1], inputs[2]),
            PrimitiveKind::Relu => self.relu(inputs[0]),
            PrimitiveKind::Conv2d => self.conv2d(inputs[0], inputs[1], inputs[2]),
            PrimitiveKind::MaxPool2x2 => self.maxpool2x2(inputs[0]),
            PrimitiveKind::Flatten => self.flatten(inputs[0]),
        }
    }

    /// `y = x Wᵀ + b` with `x: [n, in]` (or `[in]`), `W: [out, in]`, `b: [out]`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xs, ws, bs) = (
            self.value(x).shape().to_vec(),
            self.value(w).shape().to_vec(),
            self.value(b).shape().to_vec(),
        );
        if ws.len() != 2 || bs != [ws[0]] {
            return Err(Error::Shape {
                op: "affine(weight, bias)",
                left: ws,
                right: bs,
            });
        }
        let (out_dim, in_dim) = (ws[0], ws[1]);
        let (rows, out_shape) = match xs.as_slice() {
            [d] if *d == in_dim => (1, vec![out_dim]),
            [n, d] if *d == in_dim => (*n, vec![*n, out_dim]),
            _ => {
                return Err(Error::Shape {
                    op: "affine(input, weight)",
                    left: xs,
                    right: ws,
                })
            }
        };
        let xv = self.value(x).data();
        let wv = self.value(w).data();
        let bv = self.value(b).data();
        let mut out = vec![0.0; rows * out_dim];
        for i in 0..rows {
            let xi = &xv[i * in_dim..(i + 1) * in_dim];
            for o in 0..out_dim {
                let wo = &wv[o * in_dim..(o + 1) * in_dim];
                out[i * out_dim + o] = bv[o] + dot(xi, wo);
            }
        }
        let value = Tensor::new(out_shape, out)?;
        value.ensure_finite("affine")?;
        let ng = self.needs(x) || self.needs(w) || self.needs(b);
        self.push(Op::Affine { x, w, b }, value, ng)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let src = self.value(x);
        let data = src.data().iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
        let value = Tensor::new(src.shape().to_vec(), data)?;
        let ng = self.needs(x);
        self.push(Op::Relu { x }, value, ng)
    }

    /// Valid (unpadded), stride-1 2-D convolution.
    /// `x: [n, c, h, w]`, `k: [oc, c, kh, kw]`, `b: [oc]`.
    pub fn conv2d(&mut self, x: Var, k: Var, b: Var) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let ks = self.value(k).shape().to_vec();
        let bs = self.value(b).shape().to_vec();
        if xs.len() != 4 || ks.len() != 4 || xs[1] != ks[1] || xs[2] < ks[2] || xs[3] < ks[3] {
            return Err(Error::Shape {
                op: "conv2d(input, kernel)",
                left: xs,
                right: ks,
            });
        }
        if bs != [ks[0]] {
            return Err(Error::Shape {
                op: "conv2d(kernel, bias)",
                left: ks,
                right: bs,
            });
        }
        let g = ConvGeom::new(&xs, &ks);
        let out = conv_forward(self.value(x).data(), self.value(k).data(), self.value(b).data(), &g);
        let value = Tensor::new(vec![g.n, g.oc, g.oh, g.ow], out)?;
        value.ensure_finite("conv2d")?;
        let ng = self.needs(x) || self.needs(k) || self.needs(b);
        self.push(Op::Conv2d { x, k, b }, value, ng)
    }

    /// 2×2 max pooling with stride 2 over the last two axes. Odd trailing
    /// rows/columns are dropped. Ties keep the first maximum in row-major
    /// window order.
    pub fn maxpool2x2(&mut self, x: Var) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        if xs.len() < 2 || xs[xs.len() - 1] < 2 || xs[xs.len() - 2] < 2 {
            return Err(Error::Shape {
                op: "maxpool2x2",
                left: xs,
                right: vec![2, 2],
            });
        }
        let r = xs.len();
        let (h, w) = (xs[r - 2], xs[r - 1]);
        let (ph, pw) = (h / 2, w / 2);
        let planes: usize = xs[..r - 2].iter().product();
        let src = self.value(x).data();
        let mut out = Vec::with_capacity(planes * ph * pw);
        let mut winners = Vec::with_capacity(planes * ph * pw);
        for p in 0..planes {
            let base = p * h * w;
            for py in 0..ph {
                for px in 0..pw {
                    let i0 = base + (2 * py) * w + 2 * px;
                    let cands = [i0, i0 + 1, i0 + w, i0 + w + 1];
                    let mut best = cands[0];
                    for &c in &cands[1..] {
                        if src[c] > src[best] {
                            best = c;
                        }
                    }
                    out.push(src[best]);
                    winners.push(best);
                }
            }
        }
        let mut shape = xs[..r - 2].to_vec();
        shape.extend_from_slice(&[ph, pw]);
        let value = Tensor::new(shape, out)?;
        let ng = self.needs(x);
        self.push(Op::MaxPool2x2 { x, winners }, value, ng)
    }

    /// `[n, ...] -> [n, prod(...)]`.
    pub fn flatten(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let shape = vec![t.rows(), t.row_len()];
        self.reshape(x, &shape)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).reshape(shape)?;
        let ng = self.needs(x);
        self.push(Op::Reshape { x }, value, ng)
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s: f64 = self.value(x).data().iter().sum();
        let value = Tensor::scalar(s);
        value.ensure_finite("sum")?;
        let ng = self.needs(x);
        self.push(Op::Sum { x }, value, ng)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::Shape {
                op: "mul",
                left: ta.shape().to_vec(),
                right: tb.shape().to_vec(),
            });
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        value.ensure_finite("mul")?;
        let ng = self.needs(a) || self.needs(b);
        self.push(Op::Mul { a, b }, value, ng)
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Result<Var> {
        let t = self.value(x);
        let data = t.data().iter().map(|v| v * factor).collect();
        let value = Tensor::new(t.shape().to_vec(), data)?;
        value.ensure_finite("scale")?;
        let ng = self.needs(x);
        self.push(Op::Scale { x, factor }, value, ng)
    }

    /// Summed cross-entropy of softmax(logits) over the batch:
    /// `Σ_i −log p̂_{y_i}(x_i)`. Per-row losses are kept and can be read back
    /// with [`row_losses`](Tape::row_losses).
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let t = self.value(logits);
        let (rows, k) = match t.shape() {
            [k] => (1, *k),
            [n, k] => (*n, *k),
            s => {
                return Err(Error::Shape {
                    op: "softmax_cross_entropy",
                    left: s.to_vec(),
                    right: vec![labels.len()],
                })
            }
        };
        if rows != labels.len() {
            return Err(Error::Shape {
                op: "softmax_cross_entropy(labels)",
                left: t.shape().to_vec(),
                right: vec![labels.len()],
            });
        }
        if k < 2 {
            return Err(Error::Input("cross-entropy needs at least 2 classes".into()));
        }
        let mut probs = Vec::with_capacity(rows * k);
        let mut losses = Vec::with_capacity(rows);
        for (i, &y) in labels.iter().enumerate() {
            if y >= k {
                return Err(Error::Index { index: y, len: k });
            }
            let z = &t.data()[i * k..(i + 1) * k];
            probs.extend(softmax_unchecked(z));
            losses.push(ce_from_logits(z, y));
        }
        let total: f64 = losses.iter().sum();
        let value = Tensor::scalar(total);
        value.ensure_finite("softmax_cross_entropy")?;
        let ng = self.needs(logits);
        self.push(
            Op::SoftmaxCe {
                logits,
                labels: labels.to_vec(),
                probs,
                losses,
            },
            value,
            ng,
        )
    }

    /// Per-example losses of a node created by
    /// [`softmax_cross_entropy`](Tape::softmax_cross_entropy).
    pub fn row_losses(&self, var: Var) -> Result<&[f64]> {
        match &self.nodes[var.0].op {
            Op::SoftmaxCe { losses, .. } => Ok(losses),
            _ => Err(Error::Input("node is not a cross-entropy node".into())),
        }
    }

    /// Hash of the piecewise-linear activation pattern (ReLU signs and
    /// max-pool winners). Two evaluations with equal signatures lie in the
    /// same smooth region of the network.
    pub fn kink_signature(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for node in &self.nodes {
            match &node.op {
                Op::Relu { x } => {
                    for &v in self.nodes[x.0].value.data() {
                        (v > 0.0).hash(&mut h);
                    }
                }
                Op::MaxPool2x2 { winners, .. } => winners.hash(&mut h),
                _ => {}
            }
        }
        h.finish()
    }

    /// Distance of the recorded point from the nearest kink: the smallest
    /// `|z|` over ReLU inputs and the smallest gap between the winner and
    /// runner-up of any max-pool window. Windows tied at exactly 0 (dead
    /// ReLU plateaus) are skipped since their gradient vanishes either way.
    /// Infinite when the tape has no kinks.
    pub fn kink_margin(&self) -> f64 {
        let mut margin = f64::INFINITY;
        for node in &self.nodes {
            match &node.op {
                Op::Relu { x } => {
                    for &v in self.nodes[x.0].value.data() {
                        margin = margin.min(v.abs());
                    }
                }
                Op::MaxPool2x2 { x, winners } => {
                    let t = &self.nodes[x.0].value;
                    let r = t.shape().len();
                    let (h, w) = (t.shape()[r - 2], t.shape()[r - 1]);
                    let src = t.data();
                    for &c in winners {
                        let (row, col) = ((c / w) % h, c % w);
                        let i0 = c - (row % 2) * w - col % 2;
                        let runner_up = [i0, i0 + 1, i0 + w, i0 + w + 1]
                            .into_iter()
                            .filter(|&k| k != c)
                            .map(|k| src[k])
                            .fold(f64::NEG_INFINITY, f64::max);
                        if !(src[c] == 0.0 && runner_up == 0.0) {
                            margin = margin.min(src[c] - runner_up);
                        }
                    }
                }
                _ => {}
            }
        }
        margin
    }

    /// Reverse sweep from a scalar `loss`. Freezes the tape.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.mode == TapeMode::Frozen {
            return Err(Error::State("backward called on a frozen tape".into()));
        }
        if self.value(loss).len() != 1 {
            return Err(Error::Shape {
                op: "backward(loss must be scalar)",
                left: self.value(loss).shape().to_vec(),
                right: vec![],
            });
        }
        self.mode = TapeMode::Frozen;

        let mut adj: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        adj[loss.0] = Some(vec![1.0]);
        let mut grads = BTreeMap::new();

        for idx in (0..=loss.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            match &node.op {
                Op::Leaf => {
                    let t = Tensor::new(node.value.shape().to_vec(), g)?;
                    grads.insert(Var(idx), t);
                }
                Op::Affine { x, w, b } => {
                    let (x, w, b) = (*x, *w, *b);
                    let ws = self.value(w).shape();
                    let (out_dim, in_dim) = (ws[0], ws[1]);
                    let rows = g.len() / out_dim;
                    let xv = self.value(x).data();
                    let wv = self.value(w).data();
                    if self.needs(x) {
                        let mut dx = vec![0.0; rows * in_dim];
                        for i in 0..rows {
                            let dxi = &mut dx[i * in_dim..(i + 1) * in_dim];
                            for o in 0..out_dim {
                                let go = g[i * out_dim + o];
                                if go != 0.0 {
                                    axpy(go, &wv[o * in_dim..(o + 1) * in_dim], dxi);
                                }
                            }
                        }
                        accumulate(&mut adj, x, dx);
                    }
                    if self.needs(w) {
                        let mut dw = vec![0.0; out_dim * in_dim];
                        for i in 0..rows {
                            let xi = &xv[i * in_dim..(i + 1) * in_dim];
                            for o in 0..out_dim {
                                let go = g[i * out_dim + o];
                                if go != 0.0 {
                                    axpy(go, xi, &mut dw[o * in_dim..(o + 1) * in_dim]);
                                }
                            }
                        }
                        accumulate(&mut adj, w, dw);
                    }
                    if self.needs(b) {
                        let mut db = vec![0.0; out_dim];
                        for i in 0..rows {
                            for o in 0..out_dim {
                                db[o] += g[i * out_dim + o];
                            }
                        }
                        accumulate(&mut adj, b, db);
                    }
                }
                Op::Relu { x } => {
                    let xv = self.value(*x).data();
                    let dx = g
                        .iter()
                        .zip(xv)
                        .map(|(&gi, &xi)| if xi > 0.0 { gi } else { 0.0 })
                        .collect();
                    accumulate(&mut adj, *x, dx);
                }
                Op::Conv2d { x, k, b } => {
                    let (x, k, b) = (*x, *k, *b);
                    let geom = ConvGeom::new(self.value(x).shape(), self.value(k).shape());
                    let xv = self.value(x).data();
                    let kv = self.value(k).data();
                    if self.needs(x) {
                        accumulate(&mut adj, x, conv_backward_input(&g, kv, &geom));
                    }
                    if self.needs(k) {
                        accumulate(&mut adj, k, conv_backward_kernel(&g, xv, &geom));
                    }
                    if self.needs(b) {
                        let plane = geom.oh * geom.ow;
                        let mut db = vec![0.0; geom.oc];
                        for img in 0..geom.n {
                            for (o, dbo) in db.iter_mut().enumerate() {
                                let s = (img * geom.oc + o) * plane;
                                *dbo += g[s..s + plane].iter().sum::<f64>();
                            }
                        }
                        accumulate(&mut adj, b, db);
                    }
                }
                Op::MaxPool2x2 { x, winners } => {
                    let mut dx = vec![0.0; self.value(*x).len()];
                    for (gi, &wi) in g.iter().zip(winners) {
                        dx[wi] += gi;
                    }
                    accumulate(&mut adj, *x, dx);
                }
                Op::Reshape { x } => accumulate(&mut adj, *x, g),
                Op::Sum { x } => {
                    let n = self.value(*x).len();
                    accumulate(&mut adj, *x, vec![g[0]; n]);
                }
                Op::Mul { a, b } => {
                    let (a, b) = (*a, *b);
                    if self.needs(a) {
                        let bv = self.value(b).data();
                        accumulate(&mut adj, a, g.iter().zip(bv).map(|(x, y)| x * y).collect());
                    }
                    if self.needs(b) {
                        let av = self.value(a).data();
                        accumulate(&mut adj, b, g.iter().zip(av).map(|(x, y)| x * y).collect());
                    }
                }
                Op::Scale { x, factor } => {
                    let f = *factor;
                    accumulate(&mut adj, *x, g.iter().map(|v| v * f).collect());
                }
                Op::SoftmaxCe {
                    logits, labels, probs, ..
                } => {
                    let k = probs.len() / labels.len();
                    let mut dz: Vec<f64> = probs.iter().map(|p| p * g[0]).collect();
                    for (i, &y) in labels.iter().enumerate() {
                        dz[i * k + y] -= g[0];
                    }
                    accumulate(&mut adj, *logits, dz);
                }
            }
        }
        Ok(Gradients { grads })
    }
}

fn accumulate(adj: &mut [Option<Vec<f64>>], v: Var, g: Vec<f64>) {
    match &mut adj[v.0] {
        Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
        slot @ None => *slot = Some(g),
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

struct ConvGeom {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    oc: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
}

impl ConvGeom {
    fn new(xs: &[usize], ks: &[usize]) -> Self {
        ConvGeom {
            n: xs[0],
            c: xs[1],
            h: xs[2],
            w: xs[3],
            oc: ks[0],
            kh: ks[2],
            kw: ks[3],
            oh: xs[2] - ks[2] + 1,
            ow: xs[3] - ks[3] + 1,
        }
    }
}

fn conv_forward(x: &[f64], k: &[f64], b: &[f64], g: &ConvGeom) -> Vec<f64> {
    let plane_in = g.h * g.w;
    let plane_out = g.oh * g.ow;
    let mut out = vec![0.0; g.n * g.oc * plane_out];
    for img in 0..g.n {
        for o in 0..g.oc {
            let dst = &mut out[(img * g.oc + o) * plane_out..][..plane_out];
            dst.fill(b[o]);
            for ci in 0..g.c {
                let src = &x[(img * g.c + ci) * plane_in..][..plane_in];
                let kern = &k[(o * g.c + ci) * g.kh * g.kw..][..g.kh * g.kw];
                for ki in 0..g.kh {
                    for kj in 0..g.kw {
                        let kv = kern[ki * g.kw + kj];
                        for oy in 0..g.oh {
                            let s = &src[(oy + ki) * g.w + kj..][..g.ow];
                            axpy(kv, s, &mut dst[oy * g.ow..][..g.ow]);
                        }
                    }
                }
            }
        }
    }
    out
}

fn conv_backward_input(dy: &[f64], k: &[f64], g: &ConvGeom) -> Vec<f64> {
    let plane_in = g.h * g.w;
    let plane_out = g.oh * g.ow;
    let mut dx = vec![0.0; g.n * g.c * plane_in];
    for img in 0..g.n {
        for o in 0..g.oc {
            let gy = &dy[(img * g.oc + o) * plane_out..][..plane_out];
            for ci in 0..g.c {
                let dst = &mut dx[(img * g.c + ci) * plane_in..][..plane_in];
                let kern = &k[(o * g.c + ci) * g.kh * g.kw..][..g.kh * g.kw];
                for ki in 0..g.kh {
                    for kj in 0..g.kw {
                        let kv = kern[ki * g.kw + kj];
                        for oy in 0..g.oh {
                            let d = &mut dst[(oy + ki) * g.w + kj..][..g.ow];
                            axpy(kv, &gy[oy * g.ow..][..g.ow], d);
                        }
                    }
                }
            }
        }
    }
    dx
}

fn conv_backward_kernel(dy: &[f64], x: &[f64], g: &ConvGeom) -> Vec<f64> {
    let plane_in = g.h * g.w;
    let plane_out = g.oh * g.ow;
    let mut dk = vec![0.0; g.oc * g.c * g.kh * g.kw];
    for img in 0..g.n {
        for o in 0..g.oc {
            let gy = &dy[(img * g.oc + o) * plane_out..][..plane_out];
            for ci in 0..g.c {
                let src = &x[(img * g.c + ci) * plane_in..][..plane_in];
                let dkern = &mut dk[(o * g.c + ci) * g.kh * g.kw..][..g.kh * g.kw];
                for ki in 0..g.kh {
                    for kj in 0..g.kw {
                        let mut acc = 0.0;
                        for oy in 0..g.oh {
                            acc += dot(&gy[oy * g.ow..][..g.ow], &src[(oy + ki) * g.w + kj..][..g.ow]);
                        }
                        dkern[ki * g.kw + kj] += acc;
                    }
                }
            }
        }
    }
    dk
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn relu_and_maxpool_examples() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[3], &[-1.0, 0.0, 2.0]), false).unwrap();
        let r = tape.apply_primitive(PrimitiveKind::Relu, &[x]).unwrap();
        assert_eq!(tape.value(r).data(), &[0.0, 0.0, 2.0]);

        let m = tape.leaf(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]), false).unwrap();
        let p = tape.apply_primitive(PrimitiveKind::MaxPool2x2, &[m]).unwrap();
        assert_eq!(tape.value(p).data(), &[4.0]);
    }

    #[test]
    fn affine_identity() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[2], &[1.0, 1.0]), false).unwrap();
        let w = tape.leaf(t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]), false).unwrap();
        let b = tape.leaf(Tensor::zeros(&[2]), false).unwrap();
        let y = tape.apply_primitive(PrimitiveKind::Affine, &[x, w, b]).unwrap();
        assert_eq!(tape.value(y).data(), &[1.0, 1.0]);
    }

    #[test]
    fn shape_mismatch_names_both_shapes() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::zeros(&[3]), false).unwrap();
        let w = tape.leaf(Tensor::zeros(&[2, 2]), false).unwrap();
        let b = tape.leaf(Tensor::zeros(&[2]), false).unwrap();
        let err = tape.affine(x, w, b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[3]") && msg.contains("[2, 2]"), "{msg}");
    }

    #[test]
    fn backward_of_sum_is_ones() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::full(&[2, 3], 0.7), true).unwrap();
        let s = tape.sum(x).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[1.0; 6]);
    }

    #[test]
    fn backward_of_half_squared_norm_is_identity() {
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[2], &[3.0, -2.0]), true).unwrap();
        let sq = tape.mul(x, x).unwrap();
        let s = tape.sum(sq).unwrap();
        let half = tape.scale(s, 0.5).unwrap();
        let g = tape.backward(half).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[3.0, -2.0]);
    }

    #[test]
    fn softmax_ce_gradient_at_zero_logits() {
        let mut tape = Tape::new();
        let z = tape.leaf(t(&[1, 2], &[0.0, 0.0]), true).unwrap();
        let l = tape.softmax_cross_entropy(z, &[0]).unwrap();
        assert!((tape.value(l).item() - 2f64.ln()).abs() < 1e-15);
        let g = tape.backward(l).unwrap();
        assert_eq!(g.get(z).unwrap().data(), &[-0.5, 0.5]);
    }

    #[test]
    fn second_backward_is_a_state_error() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::full(&[2], 1.0), true).unwrap();
        let s = tape.sum(x).unwrap();
        tape.backward(s).unwrap();
        assert!(matches!(tape.backward(s), Err(Error::State(_))));
        assert!(matches!(tape.relu(x), Err(Error::State(_))));
    }

    #[test]
    fn overflow_is_reported() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::full(&[2], 1e300), false).unwrap();
        let y = tape.mul(x, x);
        assert!(matches!(y, Err(Error::Numeric(_))));
    }

    #[test]
    fn conv_matches_direct_sum() {
        // 1 image, 2 input channels 4x4, 3 output channels, 3x3 kernel.
        let xs: Vec<f64> = (0..32).map(|i| ((i * 7) % 11) as f64 * 0.1 - 0.4).collect();
        let ks: Vec<f64> = (0..54).map(|i| ((i * 5) % 13) as f64 * 0.05 - 0.3).collect();
        let bs = vec![0.1, -0.2, 0.3];
        let mut tape = Tape::new();
        let x = tape.leaf(t(&[1, 2, 4, 4], &xs), false).unwrap();
        let k = tape.leaf(t(&[3, 2, 3, 3], &ks), false).unwrap();
        let b = tape.leaf(t(&[3], &bs), false).unwrap();
        let y = tape.conv2d(x, k, b).unwrap();
        assert_eq!(tape.value(y).shape(), &[1, 3, 2, 2]);
        for o in 0..3 {
            for oy in 0..2 {
                for ox in 0..2 {
                    let mut s = bs[o];
                    for c in 0..2 {
                        for i in 0..3 {
                            for j in 0..3 {
                                s += ks[((o * 2 + c) * 3 + i) * 3 + j] * xs[c * 16 + (oy + i) * 4 + ox + j];
                            }
                        }
                    }
                    let got = tape.value(y).data()[(o * 2 + oy) * 2 + ox];
                    assert!((got - s).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn untracked_leaves_get_no_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::full(&[1, 2], 1.0), true).unwrap();
        let w = tape.leaf(Tensor::full(&[2, 2], 0.5), false).unwrap();
        let b = tape.leaf(Tensor::zeros(&[2]), false).unwrap();
        let y = tape.affine(x, w, b).unwrap();
        let l = tape.softmax_cross_entropy(y, &[1]).unwrap();
        let g = tape.backward(l).unwrap();
        assert!(g.get(x).is_some());
        assert!(g.get(w).is_none());
        assert_eq!(g.len(), 1);
    }
}
