//! Two-layer MLP `s(x) = V σ(Wx [+ b])`, the strict unique-argmax predictor,
//! cross-entropy and its analytic gradient, and the checkpoint format.

use base64::Engine;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{BagVector, LabeledSet};
use crate::error::{Error, Result};
use crate::numerics::{gemm, Matrix, RngStream};

/// Rows per block in batched evaluation.
const EVAL_CHUNK: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sine,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sine => z.sin(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Value and derivative; ReLU′(0) = 0.
    #[inline]
    pub fn apply_with_grad(self, z: f64) -> (f64, f64) {
        match self {
            Activation::Sine => z.sin_cos(),
            Activation::Relu => {
                if z > 0.0 {
                    (z, 1.0)
                } else {
                    (0.0, 0.0)
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Sine => "sine",
            Activation::Relu => "relu",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sine" | "sin" => Ok(Activation::Sine),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::InvalidArgument(format!("unknown activation {other}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    /// First layer, `d × p`.
    pub w: Matrix,
    /// Second layer, `p × d`.
    pub v: Matrix,
    pub bias: Option<Vec<f64>>,
    pub act: Activation,
}

impl MlpParams {
    pub fn new(w: Matrix, v: Matrix, bias: Option<Vec<f64>>, act: Activation) -> Result<Self> {
        let (d, p) = w.shape();
        if p == 0 {
            return Err(Error::Shape("modulus must be positive".into()));
        }
        if v.shape() != (p, d) {
            return Err(Error::Shape(format!("W is {d}x{p} so V must be {p}x{d}, got {:?}", v.shape())));
        }
        if let Some(b) = &bias {
            if b.len() != d {
                return Err(Error::Shape(format!("bias has length {}, width is {d}", b.len())));
            }
        }
        Ok(Self { w, v, bias, act })
    }

    /// All weights i.i.d. `N(0, std²)`; the bias too when present.
    pub fn random(d: usize, p: usize, act: Activation, bias: bool, std: f64, rng: &mut RngStream) -> Self {
        let w = Matrix::from_fn(d, p, |_, _| rng.normal(0.0, std));
        let v = Matrix::from_fn(p, d, |_, _| rng.normal(0.0, std));
        let bias = bias.then(|| (0..d).map(|_| rng.normal(0.0, std)).collect());
        Self { w, v, bias, act }
    }

    pub fn zeros(d: usize, p: usize, act: Activation, bias: bool) -> Self {
        Self { w: Matrix::zeros(d, p), v: Matrix::zeros(p, d), bias: bias.then(|| vec![0.0; d]), act }
    }

    pub fn width(&self) -> usize {
        self.w.rows()
    }

    pub fn p(&self) -> usize {
        self.w.cols()
    }

    fn check_input(&self, x: &BagVector) -> Result<()> {
        if x.p() != self.p() {
            return Err(Error::Shape(format!("input has {} coordinates, model expects {}", x.p(), self.p())));
        }
        Ok(())
    }

    /// Hidden activations `σ(Wx + b)` for one input.
    pub fn hidden(&self, x: &BagVector) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.hidden_dense(&x.to_f64()))
    }

    /// Hidden activations for an arbitrary real input.
    pub fn hidden_dense(&self, x: &[f64]) -> Vec<f64> {
        let p = self.p();
        (0..self.width())
            .map(|k| {
                let row = self.w.row(k);
                let mut z = self.bias.as_ref().map_or(0.0, |b| b[k]);
                for j in 0..p {
                    if x[j] != 0.0 {
                        z += row[j] * x[j];
                    }
                }
                self.act.apply(z)
            })
            .collect()
    }

    /// Scores for an arbitrary real input (used for ray-scaling probes).
    pub fn scores_dense(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.p() {
            return Err(Error::Shape(format!("input has {} coordinates, model expects {}", x.len(), self.p())));
        }
        self.v.matvec(&self.hidden_dense(x))
    }

    /// `n × p` score matrix for a block of inputs.
    pub fn scores_batch(&self, xs: &[&BagVector]) -> Result<Matrix> {
        for x in xs {
            self.check_input(x)?;
        }
        let n = xs.len();
        if n <= EVAL_CHUNK {
            let (h, _) = self.hidden_batch(xs, false);
            return Ok(self.output_from_hidden(&h));
        }
        let blocks: Vec<Matrix> = xs
            .par_chunks(EVAL_CHUNK)
            .map(|chunk| {
                let (h, _) = self.hidden_batch(chunk, false);
                self.output_from_hidden(&h)
            })
            .collect();
        let mut data = Vec::with_capacity(n * self.p());
        for b in blocks {
            data.extend_from_slice(b.as_slice());
        }
        Ok(Matrix::from_vec(n, self.p(), data).expect("finite scores"))
    }

    /// `(σ(Z), σ′(Z))` with `Z = X Wᵀ + b` built from the sparse bags.
    fn hidden_batch(&self, xs: &[&BagVector], with_grad: bool) -> (Matrix, Option<Matrix>) {
        let d = self.width();
        let wt = self.w.transpose();
        let mut h = Matrix::zeros(xs.len(), d);
        let mut g = with_grad.then(|| Matrix::zeros(xs.len(), d));
        for (i, x) in xs.iter().enumerate() {
            let row = h.row_mut(i);
            if let Some(b) = &self.bias {
                row.copy_from_slice(b);
            }
            for (j, c) in x.support() {
                for (z, w) in row.iter_mut().zip(wt.row(j)) {
                    *z += c * w;
                }
            }
            match &mut g {
                Some(g) => {
                    let grow = g.row_mut(i);
                    for (z, gz) in row.iter_mut().zip(grow.iter_mut()) {
                        let (a, da) = self.act.apply_with_grad(*z);
                        *z = a;
                        *gz = da;
                    }
                }
                None => row.iter_mut().for_each(|z| *z = self.act.apply(*z)),
            }
        }
        (h, g)
    }

    fn output_from_hidden(&self, h: &Matrix) -> Matrix {
        let mut s = Matrix::zeros(h.rows(), self.p());
        gemm(1.0, h, false, &self.v, true, 0.0, &mut s);
        s
    }

    pub fn num_params(&self) -> usize {
        2 * self.width() * self.p() + self.bias.as_ref().map_or(0, Vec::len)
    }
}

/// Score vector `V σ(Wx [+ b])`.
pub fn scores(theta: &MlpParams, x: &BagVector) -> Result<Vec<f64>> {
    let h = theta.hidden(x)?;
    theta.v.matvec(&h)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prediction {
    Label(usize),
    Invalid,
}

impl Prediction {
    pub fn label(self) -> Option<usize> {
        match self {
            Prediction::Label(k) => Some(k),
            Prediction::Invalid => None,
        }
    }
}

/// Strict unique argmax: the label of the single maximal score, or
/// [`Prediction::Invalid`] when the maximum is attained more than once.
pub fn uargmax(scores: &[f64]) -> Prediction {
    let mut best = 0;
    let mut tie = false;
    for (k, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = k;
            tie = false;
        } else if s == scores[best] {
            tie = true;
        }
    }
    if tie || scores.is_empty() || scores[best].is_nan() {
        Prediction::Invalid
    } else {
        Prediction::Label(best)
    }
}

pub fn predict(theta: &MlpParams, x: &BagVector) -> Result<Prediction> {
    Ok(uargmax(&scores(theta, x)?))
}

/// `−log softmax(s)[y]`, stabilized by subtracting the max.
pub fn item_cross_entropy(s: &[f64], y: usize) -> f64 {
    let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + s.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    lse - s[y]
}

/// Mean cross-entropy over the set.
pub fn cross_entropy(theta: &MlpParams, set: &LabeledSet) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::InvalidArgument("cross-entropy of an empty set".into()));
    }
    let xs: Vec<&BagVector> = set.items.iter().map(|(x, _)| x).collect();
    let s = theta.scores_batch(&xs)?;
    let total: f64 = set.items.iter().enumerate().map(|(i, (_, y))| item_cross_entropy(s.row(i), *y)).sum();
    Ok(total / set.len() as f64)
}

/// Gradient of the mean cross-entropy with respect to each parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub dw: Matrix,
    pub dv: Matrix,
    pub db: Option<Vec<f64>>,
}

/// Analytic mean gradient over the batch.
pub fn grad_cross_entropy(theta: &MlpParams, batch: &LabeledSet) -> Result<Gradients> {
    let items: Vec<(&BagVector, usize)> = batch.items.iter().map(|(x, y)| (x, *y)).collect();
    Ok(loss_and_grad(theta, &items)?.1)
}

/// Mean loss and its gradient over `(input, label)` pairs.
pub fn loss_and_grad(theta: &MlpParams, items: &[(&BagVector, usize)]) -> Result<(f64, Gradients)> {
    if items.is_empty() {
        return Err(Error::InvalidArgument("gradient of an empty batch".into()));
    }
    let xs: Vec<&BagVector> = items.iter().map(|(x, _)| *x).collect();
    for x in &xs {
        theta.check_input(x)?;
    }
    let n = items.len();
    let inv_n = 1.0 / n as f64;
    let (d, p) = (theta.width(), theta.p());

    let (h, gate) = theta.hidden_batch(&xs, true);
    let mut gate = gate.expect("requested gate");
    let mut delta = theta.output_from_hidden(&h);

    // delta ← (softmax(s) − onehot(y)) / n
    let mut loss = 0.0;
    for (i, (_, y)) in items.iter().enumerate() {
        let row = delta.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        loss += sum.ln() - (row[*y].ln());
        for v in row.iter_mut() {
            *v *= inv_n / sum;
        }
        row[*y] -= inv_n;
    }
    loss *= inv_n;

    let mut dv = Matrix::zeros(p, d);
    gemm(1.0, &delta, true, &h, false, 0.0, &mut dv);

    // dZ = (delta V) ⊙ σ′(Z), reusing the gate buffer.
    let mut dh = Matrix::zeros(n, d);
    gemm(1.0, &delta, false, &theta.v, false, 0.0, &mut dh);
    gate.as_mut_slice().iter_mut().zip(dh.as_slice()).for_each(|(g, dh)| *g *= dh);
    let dz = gate;

    let mut dwt = Matrix::zeros(p, d);
    for (i, x) in xs.iter().enumerate() {
        let dzi = dz.row(i);
        for (j, c) in x.support() {
            for (acc, g) in dwt.row_mut(j).iter_mut().zip(dzi) {
                *acc += c * g;
            }
        }
    }
    let db = theta.bias.as_ref().map(|_| {
        let mut db = vec![0.0; d];
        for i in 0..n {
            db.iter_mut().zip(dz.row(i)).for_each(|(a, g)| *a += g);
        }
        db
    });
    Ok((loss, Gradients { dw: dwt.transpose(), dv, db }))
}

pub const CHECKPOINT_FORMAT: &str = "modadd.checkpoint.v1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    format: String,
    d: usize,
    p: usize,
    act: Activation,
    bias: bool,
    /// Row-major little-endian `f64` bytes, base64 encoded.
    w: String,
    v: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<String>,
}

fn encode_f64s(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

fn decode_f64s(text: &str, expected: usize) -> Result<Vec<f64>> {
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(text)
        .map_err(|e| Error::Format(format!("bad base64 weights: {e}")))?;
    if bytes.len() != expected * 8 {
        return Err(Error::Format(format!("expected {expected} weights, found {} bytes", bytes.len())));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

impl MlpParams {
    pub fn to_checkpoint_json(&self) -> Result<String> {
        let file = CheckpointFile {
            format: CHECKPOINT_FORMAT.into(),
            d: self.width(),
            p: self.p(),
            act: self.act,
            bias: self.bias.is_some(),
            w: encode_f64s(self.w.as_slice()),
            v: encode_f64s(self.v.as_slice()),
            b: self.bias.as_deref().map(encode_f64s),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_checkpoint_json(text: &str) -> Result<Self> {
        let file: CheckpointFile = serde_json::from_str(text)?;
        if file.format != CHECKPOINT_FORMAT {
            return Err(Error::Format(format!("unsupported checkpoint format {}", file.format)));
        }
        let w = Matrix::from_vec(file.d, file.p, decode_f64s(&file.w, file.d * file.p)?)?;
        let v = Matrix::from_vec(file.p, file.d, decode_f64s(&file.v, file.d * file.p)?)?;
        let bias = match (file.bias, file.b) {
            (true, Some(b)) => Some(decode_f64s(&b, file.d)?),
            (false, None) => None,
            _ => return Err(Error::Format("bias flag and bias payload disagree".into())),
        };
        MlpParams::new(w, v, bias, file.act)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{enumerate_domain, TaskSpec};

    #[test]
    fn uargmax_cases() {
        assert_eq!(uargmax(&[2.0, 0.0, 1.0]), Prediction::Label(0));
        assert_eq!(uargmax(&[1.0, 1.0, 0.0]), Prediction::Invalid);
        assert_eq!(uargmax(&[0.0, 0.0, 0.0]), Prediction::Invalid);
        assert_eq!(uargmax(&[0.0, 1.0, 1.0, 3.0]), Prediction::Label(3));
    }

    #[test]
    fn zero_relu_net_gives_zero_scores() {
        let theta = MlpParams::zeros(4, 3, Activation::Relu, false);
        let x = BagVector::from_counts(vec![1, 1, 0]);
        assert_eq!(scores(&theta, &x).unwrap(), vec![0.0; 3]);
        assert_eq!(predict(&theta, &x).unwrap(), Prediction::Invalid);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let theta = MlpParams::zeros(4, 3, Activation::Relu, false);
        assert!(scores(&theta, &BagVector::from_counts(vec![1, 1])).is_err());
        assert!(MlpParams::new(Matrix::zeros(2, 3), Matrix::zeros(2, 3), None, Activation::Sine).is_err());
        assert!(MlpParams::new(Matrix::zeros(2, 3), Matrix::zeros(3, 2), Some(vec![0.0]), Activation::Sine).is_err());
    }

    #[test]
    fn cross_entropy_of_zero_scores_is_log_p() {
        let theta = MlpParams::zeros(3, 4, Activation::Sine, false);
        let set = enumerate_domain(TaskSpec::new(4, 2).unwrap()).unwrap();
        assert!((cross_entropy(&theta, &set).unwrap() - 4f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn cross_entropy_hand_softmax() {
        let v = item_cross_entropy(&[2f64.ln(), 0.0], 0);
        assert!((v + (2.0f64 / 3.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn cross_entropy_shrinks_with_margin() {
        let mut last = f64::INFINITY;
        for gap in [0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
            let v = item_cross_entropy(&[gap, 0.0, 0.0], 0);
            assert!(v < last);
            last = v;
        }
        assert!(last < 1e-6);
    }

    #[test]
    fn zero_second_layer_means_zero_first_layer_gradient() {
        let mut rng = RngStream::new(5, 5);
        let mut theta = MlpParams::random(6, 5, Activation::Sine, true, 0.5, &mut rng);
        theta.v = Matrix::zeros(5, 6);
        let set = enumerate_domain(TaskSpec::new(5, 2).unwrap()).unwrap();
        let g = grad_cross_entropy(&theta, &set).unwrap();
        assert!(g.dw.is_zero());
        assert!(g.db.unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dead_relu_unit_gets_no_gradient() {
        let mut rng = RngStream::new(6, 6);
        let mut theta = MlpParams::random(4, 3, Activation::Relu, false, 1.0, &mut rng);
        for j in 0..3 {
            theta.w[(2, j)] = -1.0;
        }
        let set = enumerate_domain(TaskSpec::new(3, 3).unwrap()).unwrap();
        let g = grad_cross_entropy(&theta, &set).unwrap();
        assert!(g.dw.row(2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn batched_scores_match_single_scores() {
        let mut rng = RngStream::new(1, 2);
        let theta = MlpParams::random(7, 5, Activation::Sine, true, 1.0, &mut rng);
        let set = enumerate_domain(TaskSpec::new(5, 3).unwrap()).unwrap();
        let xs: Vec<&BagVector> = set.items.iter().map(|(x, _)| x).collect();
        let s = theta.scores_batch(&xs).unwrap();
        for (i, x) in xs.iter().enumerate() {
            let single = scores(&theta, x).unwrap();
            for (a, b) in single.iter().zip(s.row(i)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn checkpoint_round_trip_is_bitwise() {
        let mut rng = RngStream::new(8, 8);
        let theta = MlpParams::random(5, 3, Activation::Sine, true, 0.3, &mut rng);
        let text = theta.to_checkpoint_json().unwrap();
        let back = MlpParams::from_checkpoint_json(&text).unwrap();
        assert_eq!(back, theta);
        assert!(MlpParams::from_checkpoint_json(&text.replace("\"bias\": true", "\"bias\": false")).is_err());
    }
}
