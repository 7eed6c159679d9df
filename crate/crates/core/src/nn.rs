//! Classifiers: linear, MLP and the capacity-`d` CNN family.
//!
//! Inputs are always batches `[n, features]` with the batch dimension
//! leading. The CNN reshapes each 784-feature row into a `1×28×28` image.

use std::fs;
use std::path::Path;

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autodiff::{argmax, softmax_unchecked, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::par;

pub const IMAGE_SIDE: usize = 28;
pub const KERNEL: usize = 5;

const MAGIC: &[u8; 4] = b"SNSM";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    Linear {
        in_dim: usize,
        classes: usize,
    },
    /// `widths[0]` is the input dimension and the last entry the class
    /// count; hidden layers use ReLU.
    Mlp {
        widths: Vec<usize>,
    },
    /// Two 5×5 valid convolutions with `2^(d-1)` and `2^d` kernels, each
    /// followed by ReLU and 2×2 max pooling, then a `2^(d+4)`-unit ReLU layer
    /// and a linear head. Input is a single-channel 28×28 image.
    CnnCapacity {
        d: u32,
        classes: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub arch: Architecture,
    pub seed: u64,
}

impl ModelSpec {
    pub fn linear(in_dim: usize, classes: usize, seed: u64) -> Self {
        ModelSpec {
            arch: Architecture::Linear { in_dim, classes },
            seed,
        }
    }

    pub fn mlp(widths: Vec<usize>, seed: u64) -> Self {
        ModelSpec {
            arch: Architecture::Mlp { widths },
            seed,
        }
    }

    pub fn cnn(d: u32, seed: u64) -> Self {
        ModelSpec {
            arch: Architecture::CnnCapacity { d, classes: 10 },
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.arch {
            Architecture::Linear { in_dim, classes } => {
                if *in_dim == 0 || *classes < 2 {
                    return Err(Error::Spec(format!(
                        "linear model needs in_dim ≥ 1 and ≥ 2 classes, got {in_dim}, {classes}"
                    )));
                }
            }
            Architecture::Mlp { widths } => {
                if widths.len() < 2 || widths.contains(&0) || *widths.last().unwrap() < 2 {
                    return Err(Error::Spec(format!(
                        "MLP widths must be positive with ≥ 2 outputs, got {widths:?}"
                    )));
                }
            }
            Architecture::CnnCapacity { d, classes } => {
                if *d < 1 {
                    return Err(Error::Spec(format!("CNN capacity must be ≥ 1, got {d}")));
                }
                if *d > 12 {
                    return Err(Error::Spec(format!("CNN capacity {d} is too large")));
                }
                if *classes < 2 {
                    return Err(Error::Spec(format!("CNN needs ≥ 2 classes, got {classes}")));
                }
            }
        }
        Ok(())
    }

    pub fn input_len(&self) -> usize {
        match &self.arch {
            Architecture::Linear { in_dim, .. } => *in_dim,
            Architecture::Mlp { widths } => widths[0],
            Architecture::CnnCapacity { .. } => IMAGE_SIDE * IMAGE_SIDE,
        }
    }

    pub fn classes(&self) -> usize {
        match &self.arch {
            Architecture::Linear { classes, .. } => *classes,
            Architecture::Mlp { widths } => *widths.last().unwrap(),
            Architecture::CnnCapacity { classes, .. } => *classes,
        }
    }

    /// Parameter names and shapes in declaration order.
    pub fn layout(&self) -> Vec<(String, Vec<usize>)> {
        let dense = |name: &str, out: usize, inp: usize| {
            vec![
                (format!("{name}.weight"), vec![out, inp]),
                (format!("{name}.bias"), vec![out]),
            ]
        };
        match &self.arch {
            Architecture::Linear { in_dim, classes } => dense("head", *classes, *in_dim),
            Architecture::Mlp { widths } => {
                let last = widths.len() - 2;
                (0..=last)
                    .flat_map(|i| {
                        let name = if i == last {
                            "head".to_string()
                        } else {
                            format!("fc{}", i + 1)
                        };
                        dense(&name, widths[i + 1], widths[i])
                    })
                    .collect()
            }
            Architecture::CnnCapacity { d, classes } => {
                let (c1, c2, fc) = cnn_widths(*d);
                let conv = |n: usize| n - KERNEL + 1;
                let side = conv(conv(IMAGE_SIDE) / 2) / 2;
                let mut l = vec![
                    ("conv1.weight".to_string(), vec![c1, 1, KERNEL, KERNEL]),
                    ("conv1.bias".to_string(), vec![c1]),
                    ("conv2.weight".to_string(), vec![c2, c1, KERNEL, KERNEL]),
                    ("conv2.bias".to_string(), vec![c2]),
                ];
                l.extend(dense("fc", fc, c2 * side * side));
                l.extend(dense("head", *classes, fc));
                l
            }
        }
    }

    pub fn num_params(&self) -> usize {
        self.layout().iter().map(|(_, s)| s.iter().product::<usize>()).sum()
    }
}

/// `(first conv kernels, second conv kernels, fully connected units)`.
pub fn cnn_widths(d: u32) -> (usize, usize, usize) {
    (1 << (d - 1), 1 << d, 1 << (d + 4))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    names: Vec<String>,
    params: Vec<Tensor>,
}

impl Model {
    /// Kaiming-uniform weights (bound `√(6/fan_in)`), zero biases, seeded by
    /// `spec.seed`.
    pub fn build(spec: ModelSpec) -> Result<Model> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut names = Vec::new();
        let mut params = Vec::new();
        for (name, shape) in spec.layout() {
            let t = if name.ends_with(".bias") {
                Tensor::zeros(&shape)
            } else {
                let fan_in: usize = shape[1..].iter().product();
                let bound = (6.0 / fan_in as f64).sqrt();
                let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
                let n = shape.iter().product();
                Tensor::new(shape, (0..n).map(|_| dist.sample(&mut rng)).collect())?
            };
            names.push(name);
            params.push(t);
        }
        log::debug!("built {:?} with {} parameters", spec.arch, spec.num_params());
        Ok(Model { spec, names, params })
    }

    /// A model with the given parameter values; shapes must match the spec.
    pub fn from_params(spec: ModelSpec, params: Vec<Tensor>) -> Result<Model> {
        spec.validate()?;
        let layout = spec.layout();
        if layout.len() != params.len() {
            return Err(Error::Shape {
                op: "from_params(count)",
                left: vec![layout.len()],
                right: vec![params.len()],
            });
        }
        for ((_, shape), p) in layout.iter().zip(&params) {
            if shape.as_slice() != p.shape() {
                return Err(Error::Shape {
                    op: "from_params",
                    left: shape.clone(),
                    right: p.shape().to_vec(),
                });
            }
        }
        let names = layout.into_iter().map(|(n, _)| n).collect();
        Ok(Model { spec, names, params })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.params[i])
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(move |i| &mut self.params[i])
    }

    pub fn num_params(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn input_len(&self) -> usize {
        self.spec.input_len()
    }

    pub fn classes(&self) -> usize {
        self.spec.classes()
    }

    /// Records every parameter as a leaf.
    pub fn leaf_params(&self, tape: &mut Tape, requires_grad: bool) -> Result<Vec<Var>> {
        self.params
            .iter()
            .map(|p| tape.leaf(p.clone(), requires_grad))
            .collect()
    }

    /// Records the forward pass for a batch `x: [n, features]` and returns
    /// the `[n, K]` logits.
    pub fn forward_on_tape(&self, tape: &mut Tape, x: Var, params: &[Var]) -> Result<Var> {
        let xs = tape.value(x).shape().to_vec();
        let n = match xs.as_slice() {
            [n, f] if *f == self.input_len() => *n,
            _ => {
                return Err(Error::Shape {
                    op: "forward(input)",
                    left: xs,
                    right: vec![0, self.input_len()],
                })
            }
        };
        match &self.spec.arch {
            Architecture::Linear { .. } => tape.affine(x, params[0], params[1]),
            Architecture::Mlp { .. } => {
                let layers = params.len() / 2;
                let mut h = x;
                for l in 0..layers {
                    h = tape.affine(h, params[2 * l], params[2 * l + 1])?;
                    if l + 1 < layers {
                        h = tape.relu(h)?;
                    }
                }
                Ok(h)
            }
            Architecture::CnnCapacity { .. } => {
                let img = tape.reshape(x, &[n, 1, IMAGE_SIDE, IMAGE_SIDE])?;
                let h = tape.conv2d(img, params[0], params[1])?;
                let h = tape.relu(h)?;
                let h = tape.maxpool2x2(h)?;
                let h = tape.conv2d(h, params[2], params[3])?;
                let h = tape.relu(h)?;
                let h = tape.maxpool2x2(h)?;
                let h = tape.flatten(h)?;
                let h = tape.affine(h, params[4], params[5])?;
                let h = tape.relu(h)?;
                tape.affine(h, params[6], params[7])
            }
        }
    }

    fn check_batch(&self, x: &Tensor) -> Result<()> {
        if x.shape().len() != 2 || x.shape()[1] != self.input_len() {
            return Err(Error::Shape {
                op: "forward(input)",
                left: x.shape().to_vec(),
                right: vec![x.rows(), self.input_len()],
            });
        }
        Ok(())
    }

    fn check_labels(&self, x: &Tensor, y: &[usize]) -> Result<()> {
        self.check_batch(x)?;
        if y.len() != x.rows() {
            return Err(Error::Shape {
                op: "labels",
                left: x.shape().to_vec(),
                right: vec![y.len()],
            });
        }
        if let Some(&bad) = y.iter().find(|&&c| c >= self.classes()) {
            return Err(Error::Index {
                index: bad,
                len: self.classes(),
            });
        }
        Ok(())
    }

    fn logits_chunk(&self, x: Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let ps = self.leaf_params(&mut tape, false)?;
        let xv = tape.leaf(x, false)?;
        let z = self.forward_on_tape(&mut tape, xv, &ps)?;
        Ok(tape.value(z).clone())
    }

    /// `[n, K]` logits. Rows are computed independently, so row `i` equals
    /// the forward pass of row `i` alone.
    pub fn forward_logits(&self, x: &Tensor) -> Result<Tensor> {
        self.check_batch(x)?;
        let ranges = par::chunks(x.rows(), par::CHUNK);
        let parts = par::map(&ranges, |r| {
            let idx: Vec<usize> = r.clone().collect();
            self.logits_chunk(x.select_rows(&idx))
        });
        let k = self.classes();
        let mut data = Vec::with_capacity(x.rows() * k);
        for p in parts {
            data.extend_from_slice(p?.data());
        }
        Tensor::new(vec![x.rows(), k], data)
    }

    /// Argmax of the logits per row; ties go to the lowest class index.
    pub fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        let z = self.forward_logits(x)?;
        Ok((0..z.rows()).map(|i| argmax(z.row(i))).collect())
    }

    /// Softmax probabilities per row.
    pub fn probabilities(&self, x: &Tensor) -> Result<Tensor> {
        let z = self.forward_logits(x)?;
        let mut data = Vec::with_capacity(z.len());
        for i in 0..z.rows() {
            data.extend(softmax_unchecked(z.row(i)));
        }
        Tensor::new(z.shape().to_vec(), data)
    }

    /// Per-row `(cross-entropy, p̂_y, predicted class)`.
    pub fn evaluate(&self, x: &Tensor, y: &[usize]) -> Result<Vec<RowEval>> {
        self.check_labels(x, y)?;
        let z = self.forward_logits(x)?;
        Ok(y.iter()
            .enumerate()
            .map(|(i, &label)| RowEval::from_logits(z.row(i), label))
            .collect())
    }

    fn input_grad_chunk(&self, x: Tensor, y: &[usize]) -> Result<(Tensor, Vec<RowEval>)> {
        let mut tape = Tape::new();
        let ps = self.leaf_params(&mut tape, false)?;
        let xv = tape.leaf(x, true)?;
        let z = self.forward_on_tape(&mut tape, xv, &ps)?;
        let evals = y
            .iter()
            .enumerate()
            .map(|(i, &label)| RowEval::from_logits(tape.value(z).row(i), label))
            .collect();
        let loss = tape.softmax_cross_entropy(z, y)?;
        let mut g = tape.backward(loss)?;
        let gx = g.remove(xv).expect("input leaf requires grad");
        Ok((gx, evals))
    }

    /// Per-row `∇ₓ ℓ(f(xᵢ), yᵢ)` with parameters held fixed, together with
    /// the evaluation at the same points (one forward and one backward pass).
    pub fn input_gradient(&self, x: &Tensor, y: &[usize]) -> Result<(Tensor, Vec<RowEval>)> {
        self.check_labels(x, y)?;
        let ranges = par::chunks(x.rows(), par::CHUNK);
        let parts = par::map(&ranges, |r| {
            let idx: Vec<usize> = r.clone().collect();
            self.input_grad_chunk(x.select_rows(&idx), &y[r.clone()])
        });
        let mut data = Vec::with_capacity(x.len());
        let mut evals = Vec::with_capacity(x.rows());
        for p in parts {
            let (g, e) = p?;
            data.extend_from_slice(g.data());
            evals.extend(e);
        }
        Ok((Tensor::new(x.shape().to_vec(), data)?, evals))
    }

    fn param_grad_chunk(&self, x: Tensor, y: &[usize]) -> Result<(f64, Vec<Tensor>)> {
        let mut tape = Tape::new();
        let ps = self.leaf_params(&mut tape, true)?;
        let xv = tape.leaf(x, false)?;
        let z = self.forward_on_tape(&mut tape, xv, &ps)?;
        let loss = tape.softmax_cross_entropy(z, y)?;
        let total = tape.value(loss).item();
        let mut g = tape.backward(loss)?;
        let grads = ps
            .iter()
            .map(|&p| g.remove(p).expect("parameter leaf requires grad"))
            .collect();
        Ok((total, grads))
    }

    /// Summed cross-entropy over the batch and its gradient with respect to
    /// every parameter. Chunks are reduced in a fixed order.
    pub fn loss_and_param_grads(&self, x: &Tensor, y: &[usize]) -> Result<(f64, Vec<Tensor>)> {
        self.check_labels(x, y)?;
        if x.rows() == 0 {
            return Err(Error::Input("empty batch".into()));
        }
        let ranges = par::chunks(x.rows(), par::CHUNK);
        let parts = par::map(&ranges, |r| {
            let idx: Vec<usize> = r.clone().collect();
            self.param_grad_chunk(x.select_rows(&idx), &y[r.clone()])
        });
        let mut total = 0.0;
        let mut acc: Option<Vec<Tensor>> = None;
        for p in parts {
            let (l, g) = p?;
            total += l;
            match &mut acc {
                None => acc = Some(g),
                Some(a) => {
                    for (ai, gi) in a.iter_mut().zip(&g) {
                        ai.data_mut().iter_mut().zip(gi.data()).for_each(|(u, v)| *u += v);
                    }
                }
            }
        }
        Ok((total, acc.expect("non-empty batch")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let spec = serde_json::to_vec(&self.spec).expect("spec serializes");
        let mut out = Vec::with_capacity(12 + spec.len() + 8 * self.num_params());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(spec.len() as u32).to_le_bytes());
        out.extend_from_slice(&spec);
        for p in &self.params {
            for v in p.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Model> {
        let short = |need: usize| Error::Length {
            path: origin.to_path_buf(),
            expected: need,
            actual: bytes.len(),
        };
        if bytes.len() < 12 {
            return Err(short(12));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::Format {
                path: origin.to_path_buf(),
                expected: format!("magic {:?}", String::from_utf8_lossy(MAGIC)),
                actual: format!("{:?}", String::from_utf8_lossy(&bytes[..4])),
            });
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::Format {
                path: origin.to_path_buf(),
                expected: format!("version {FORMAT_VERSION}"),
                actual: format!("version {version}"),
            });
        }
        let spec_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        if bytes.len() < 12 + spec_len {
            return Err(short(12 + spec_len));
        }
        let spec: ModelSpec = serde_json::from_slice(&bytes[12..12 + spec_len]).map_err(|e| Error::Format {
            path: origin.to_path_buf(),
            expected: "JSON model spec".into(),
            actual: e.to_string(),
        })?;
        spec.validate()?;
        let body = &bytes[12 + spec_len..];
        let need = 12 + spec_len + 8 * spec.num_params();
        if bytes.len() != need {
            return Err(short(need));
        }
        let mut values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let params = spec
            .layout()
            .into_iter()
            .map(|(_, shape)| {
                let n = shape.iter().product();
                Tensor::new(shape, values.by_ref().take(n).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Model::from_params(spec, params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Model> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Model::from_bytes(&bytes, path)
    }

    /// `(w, b)` of the class-1-minus-class-0 score of a two-class linear
    /// model: class 1 is predicted iff `w·x + b > 0`.
    pub fn binary_boundary(&self) -> Result<(Vec<f64>, f64)> {
        match self.spec.arch {
            Architecture::Linear { in_dim, classes: 2 } => {
                let w = self.params[0].data();
                let b = self.params[1].data();
                let dw = (0..in_dim).map(|j| w[in_dim + j] - w[j]).collect();
                Ok((dw, b[1] - b[0]))
            }
            _ => Err(Error::Unsupported(
                "boundary parameters need a two-class linear model".into(),
            )),
        }
    }

    /// SHA-256 of the checkpoint bytes, hex encoded.
    pub fn hash_hex(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }
}

/// Evaluation of one labeled row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RowEval {
    pub loss: f64,
    pub p_label: f64,
    pub predicted: usize,
}

impl RowEval {
    pub fn from_logits(z: &[f64], label: usize) -> RowEval {
        let probs = softmax_unchecked(z);
        RowEval {
            loss: crate::autodiff::ce_from_logits(z, label),
            p_label: probs[label],
            predicted: argmax(z),
        }
    }

    pub fn correct(&self, label: usize) -> bool {
        self.predicted == label
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(rows: &[&[f64]]) -> Tensor {
        Tensor::stack_rows(&[rows[0].len()], rows).unwrap()
    }

    #[test]
    fn linear_parameter_count() {
        let m = Model::build(ModelSpec::linear(2, 2, 0)).unwrap();
        assert_eq!(m.num_params(), 6);
    }

    #[test]
    fn cnn_capacity_one_first_conv_has_one_kernel() {
        let m = Model::build(ModelSpec::cnn(1, 0)).unwrap();
        assert_eq!(m.param("conv1.weight").unwrap().shape(), &[1, 1, 5, 5]);
        assert_eq!(m.param("conv2.weight").unwrap().shape(), &[2, 1, 5, 5]);
        assert_eq!(m.param("fc.weight").unwrap().shape(), &[32, 32]);
        assert!(Model::build(ModelSpec::cnn(0, 0)).is_err());
    }

    #[test]
    fn capacity_param_count_increases() {
        let counts: Vec<usize> = (1..=5).map(|d| ModelSpec::cnn(d, 0).num_params()).collect();
        assert!(counts.windows(2).all(|w| w[0] < w[1]), "{counts:?}");
    }

    #[test]
    fn build_is_deterministic() {
        let a = Model::build(ModelSpec::mlp(vec![3, 8, 2], 7)).unwrap();
        let b = Model::build(ModelSpec::mlp(vec![3, 8, 2], 7)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.hash_hex(), b.hash_hex());
    }

    #[test]
    fn linear_margin_example() {
        let w = Tensor::new(vec![2, 2], vec![0.0, 0.0, 1.0, 0.0]).unwrap();
        let b = Tensor::vector(vec![0.0, -0.5]);
        let m = Model::from_params(ModelSpec::linear(2, 2, 0), vec![w, b]).unwrap();
        let z = m.forward_logits(&batch(&[&[0.7, 42.0]])).unwrap();
        assert!((z.data()[1] - z.data()[0] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn zero_head_gives_equal_logits() {
        let mut m = Model::build(ModelSpec::mlp(vec![2, 4, 3], 1)).unwrap();
        m.param_mut("head.weight").unwrap().data_mut().fill(0.0);
        let z = m.forward_logits(&batch(&[&[0.3, -1.0]])).unwrap();
        assert!(z.data().iter().all(|&v| v == z.data()[0]));
    }

    #[test]
    fn batch_rows_match_single_rows() {
        let m = Model::build(ModelSpec::cnn(1, 3)).unwrap();
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| (0..784).map(|j| ((i * 31 + j * 7) % 97) as f64 / 97.0).collect())
            .collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let z = m.forward_logits(&batch(&refs)).unwrap();
        for (i, r) in refs.iter().enumerate() {
            let zi = m.forward_logits(&batch(&[r])).unwrap();
            assert_eq!(zi.data(), z.row(i));
        }
    }

    #[test]
    fn linear_input_gradient_closed_form() {
        let m = Model::build(ModelSpec::linear(3, 4, 11)).unwrap();
        let x = batch(&[&[0.2, -0.4, 1.1]]);
        let (g, _) = m.input_gradient(&x, &[2]).unwrap();
        let p = m.probabilities(&x).unwrap();
        let w = m.param("head.weight").unwrap();
        for j in 0..3 {
            let expect: f64 = (0..4)
                .map(|k| (p.data()[k] - if k == 2 { 1.0 } else { 0.0 }) * w.data()[k * 3 + j])
                .sum();
            assert!((g.data()[j] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn checkpoint_round_trip_and_errors() {
        let m = Model::build(ModelSpec::cnn(1, 5)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.snsm");
        m.save(&path).unwrap();
        assert_eq!(Model::load(&path).unwrap(), m);

        let mut bytes = m.to_bytes();
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(Model::from_bytes(&bytes, &path), Err(Error::Length { .. })));
        let mut bad = m.to_bytes();
        bad[0] = b'X';
        assert!(matches!(Model::from_bytes(&bad, &path), Err(Error::Format { .. })));
    }

    #[test]
    fn predict_tie_goes_to_lowest() {
        let w = Tensor::zeros(&[2, 2]);
        let b = Tensor::vector(vec![0.5, 0.5]);
        let m = Model::from_params(ModelSpec::linear(2, 2, 0), vec![w, b]).unwrap();
        assert_eq!(m.predict(&batch(&[&[1.0, 2.0]])).unwrap(), vec![0]);
    }
}
