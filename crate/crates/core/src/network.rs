//! A minimal fully-connected classifier: initialisation schemes, minibatch
//! SGD on softmax cross-entropy, per-epoch snapshots, and the measurements
//! taken on them.
//!
//! Activations are stored samples × neurons, so a layer computes
//! `T_l = α(T_{l−1} W_l + 1 b_lᵀ)` with `W_l` of shape `m × n`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::correlation::{
    neuronal_correlation, pairwise_cosines, weight_correlation, ActivationMatrix, WeightMatrix,
};
use crate::data::{Dataset, GaussianStream};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Identity => v,
            Activation::Relu => v.max(0.0),
            Activation::Tanh => v.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `u`.
    fn derivative(self, u: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if u > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = u.tanh();
                1.0 - t * t
            }
        }
    }

    fn code(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Tanh => 2,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Relu),
            2 => Some(Activation::Tanh),
            _ => None,
        }
    }
}

impl FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" | "linear" => Ok(Activation::Identity),
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::InvalidParameter(format!("unknown activation '{other}'"))),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    /// `U(−0.05, 0.05)`
    Random,
    /// `N(0, 0.05²)` resampled outside `±0.1`.
    TruncatedNormal,
    /// `U(±√(6/(m+n)))`
    Xavier,
    /// `N(0, 2/m)`
    HeNormal,
}

impl Init {
    pub const ALL: [Init; 4] = [Init::Random, Init::TruncatedNormal, Init::Xavier, Init::HeNormal];

    pub fn sample(self, m: usize, n: usize, g: &mut GaussianStream) -> f64 {
        match self {
            Init::Random => g.uniform(-0.05, 0.05),
            Init::TruncatedNormal => loop {
                let z = g.next_normal();
                if z.abs() <= 2.0 {
                    break 0.05 * z;
                }
            },
            Init::Xavier => {
                let a = (6.0 / (m + n) as f64).sqrt();
                g.uniform(-a, a)
            }
            Init::HeNormal => (2.0 / m as f64).sqrt() * g.next_normal(),
        }
    }
}

impl FromStr for Init {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "random" | "uniform" => Ok(Init::Random),
            "truncated-normal" | "truncnormal" => Ok(Init::TruncatedNormal),
            "xavier" | "glorot" => Ok(Init::Xavier),
            "he-normal" | "he" => Ok(Init::HeNormal),
            other => Err(Error::InvalidParameter(format!("unknown initialisation '{other}'"))),
        }
    }
}

impl fmt::Display for Init {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Init::Random => "random",
            Init::TruncatedNormal => "truncated-normal",
            Init::Xavier => "xavier",
            Init::HeNormal => "he-normal",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// `[I, h₁, …, h_k, O]`.
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub init: Init,
    pub seed: u64,
}

impl NetworkSpec {
    pub fn new(layer_sizes: Vec<usize>, activation: Activation, init: Init, seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "layer sizes must list at least input and output, all ≥ 1: {layer_sizes:?}"
            )));
        }
        Ok(Self {
            layer_sizes,
            activation,
            init,
            seed,
        })
    }

    /// Parses `"I-20-20-O"`; the `I` and `O` placeholders take the given
    /// sizes, and concrete numbers are accepted in their place.
    pub fn parse(
        notation: &str,
        input: usize,
        output: usize,
        activation: Activation,
        init: Init,
        seed: u64,
    ) -> Result<Self> {
        let tokens: Vec<&str> = notation.trim().split('-').map(str::trim).collect();
        if tokens.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "network notation '{notation}' needs at least an input and an output"
            )));
        }
        let last = tokens.len() - 1;
        let sizes = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| match (i, *t) {
                (0, "I") => Ok(input),
                (i, "O") if i == last => Ok(output),
                (_, t) => t.parse::<usize>().map_err(|_| {
                    Error::InvalidParameter(format!("bad layer size '{t}' in '{notation}'"))
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(sizes, activation, init, seed)
    }

    /// `"I-h₁-…-h_k-O"`.
    pub fn notation(&self) -> String {
        let mut parts = vec!["I".to_string()];
        let k = self.layer_sizes.len();
        parts.extend(self.layer_sizes[1..k - 1].iter().map(|s| s.to_string()));
        parts.push("O".into());
        parts.join("-")
    }

    /// `"784-20-10"`.
    pub fn concrete_notation(&self) -> String {
        self.layer_sizes
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join("-")
    }

    pub fn hidden_layers(&self) -> usize {
        self.layer_sizes.len() - 2
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.layer_sizes.last().expect("nonempty")
    }
}

/// Network parameters at one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSnapshot {
    pub epoch: usize,
    pub activation: Activation,
    pub weights: Vec<WeightMatrix>,
    pub biases: Vec<DVector<f64>>,
    pub train_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    /// Mean minibatch loss over the epoch that produced this snapshot.
    pub train_loss: Option<f64>,
}

impl NetworkSnapshot {
    pub fn layers(&self) -> usize {
        self.weights.len()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.weights[0].inputs()];
        s.extend(self.weights.iter().map(|w| w.outputs()));
        s
    }
}

/// Epoch-0 snapshot with weights drawn from the chosen scheme and zero biases.
///
/// One generator seeded with `spec.seed` fills the layers in order, each
/// matrix row by row.
pub fn initialize(spec: &NetworkSpec) -> NetworkSnapshot {
    let mut g = GaussianStream::new(spec.seed);
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for (l, pair) in spec.layer_sizes.windows(2).enumerate() {
        let (m, n) = (pair[0], pair[1]);
        let mut w = DMatrix::zeros(m, n);
        for i in 0..m {
            for j in 0..n {
                w[(i, j)] = spec.init.sample(m, n, &mut g);
            }
        }
        weights.push(WeightMatrix::new(w).expect("finite").with_layer(l + 1));
        biases.push(DVector::zeros(n));
    }
    NetworkSnapshot {
        epoch: 0,
        activation: spec.activation,
        weights,
        biases,
        train_accuracy: None,
        test_accuracy: None,
        train_loss: None,
    }
}

fn affine(h: &DMatrix<f64>, w: &DMatrix<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    let mut u = h * w;
    for (j, mut col) in u.column_iter_mut().enumerate() {
        col.add_scalar_mut(b[j]);
    }
    u
}

/// Pre-activations and outputs of every layer; the last output is the
/// logit matrix (softmax not applied).
fn forward_all(s: &NetworkSnapshot, x: &DMatrix<f64>) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
    let l = s.layers();
    let mut pre = Vec::with_capacity(l);
    let mut out = Vec::with_capacity(l);
    let mut h = x.clone();
    for (i, (w, b)) in s.weights.iter().zip(&s.biases).enumerate() {
        let u = affine(&h, w.values(), b);
        h = if i + 1 < l { u.map(|v| s.activation.apply(v)) } else { u.clone() };
        pre.push(u);
        out.push(h.clone());
    }
    (pre, out)
}

fn check_inputs(s: &NetworkSnapshot, x: &DMatrix<f64>) -> Result<()> {
    if x.ncols() != s.weights[0].inputs() {
        return Err(Error::DimensionMismatch {
            context: "network input",
            expected: format!("{} features", s.weights[0].inputs()),
            found: format!("{} features", x.ncols()),
        });
    }
    Ok(())
}

/// Output logits for `x`.
pub fn logits(s: &NetworkSnapshot, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_inputs(s, x)?;
    Ok(forward_all(s, x).1.pop().expect("at least one layer"))
}

fn softmax_rows(z: &DMatrix<f64>) -> DMatrix<f64> {
    let mut p = z.clone();
    for i in 0..p.nrows() {
        let max = p.row(i).max();
        let mut sum = 0.0;
        for j in 0..p.ncols() {
            let e = (p[(i, j)] - max).exp();
            p[(i, j)] = e;
            sum += e;
        }
        for j in 0..p.ncols() {
            p[(i, j)] /= sum;
        }
    }
    p
}

fn check_layer(s: &NetworkSnapshot, layer: usize) -> Result<()> {
    if layer == 0 || layer > s.layers() {
        return Err(Error::InvalidParameter(format!(
            "layer {layer} out of range 1..={}",
            s.layers()
        )));
    }
    Ok(())
}

/// Outputs of `layer` (1-based). Hidden layers return `α(U)`; the final
/// layer returns softmax probabilities.
pub fn forward_record(s: &NetworkSnapshot, x: &DMatrix<f64>, layer: usize) -> Result<ActivationMatrix> {
    check_layer(s, layer)?;
    check_inputs(s, x)?;
    let (_, mut out) = forward_all(s, x);
    let mut t = out.swap_remove(layer - 1);
    if layer == s.layers() {
        t = softmax_rows(&t);
    }
    Ok(ActivationMatrix::new(t)?.with_origin(layer, s.epoch))
}

/// Pre-activations `U_l = T_{l−1} W_l + 1 b_lᵀ` of `layer` (1-based).
pub fn preactivations(s: &NetworkSnapshot, x: &DMatrix<f64>, layer: usize) -> Result<ActivationMatrix> {
    check_layer(s, layer)?;
    check_inputs(s, x)?;
    let (mut pre, _) = forward_all(s, x);
    Ok(ActivationMatrix::new(pre.swap_remove(layer - 1))?.with_origin(layer, s.epoch))
}

/// Inputs to `layer` (1-based): the raw data for layer 1, else the outputs
/// of the layer below.
pub fn layer_input(s: &NetworkSnapshot, x: &DMatrix<f64>, layer: usize) -> Result<ActivationMatrix> {
    check_layer(s, layer)?;
    if layer == 1 {
        return ActivationMatrix::new(x.clone());
    }
    forward_record(s, x, layer - 1)
}

/// Fraction of samples whose largest logit matches the label.
pub fn accuracy(s: &NetworkSnapshot, x: &DMatrix<f64>, labels: &[u32]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::InvalidParameter("accuracy on an empty set".into()));
    }
    let z = logits(s, x)?;
    let hits = (0..z.nrows())
        .filter(|&i| z.row(i).transpose().argmax().0 == labels[i] as usize)
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Gradients of the mean loss with respect to one layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

/// Mean softmax cross-entropy over the rows of `x` and its gradients.
pub fn loss_and_gradients(
    s: &NetworkSnapshot,
    x: &DMatrix<f64>,
    labels: &[u32],
) -> Result<(f64, Vec<LayerGradient>)> {
    check_inputs(s, x)?;
    let classes = s.weights.last().expect("nonempty").outputs();
    if let Some(&bad) = labels.iter().find(|&&l| l as usize >= classes) {
        return Err(Error::InvalidInput(format!("label {bad} but only {classes} outputs")));
    }
    let b = x.nrows() as f64;
    let (pre, out) = forward_all(s, x);
    let z = out.last().expect("nonempty");
    let mut g = softmax_rows(z);
    let mut loss = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let max = z.row(i).max();
        let lse = max + z.row(i).iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - z[(i, y as usize)];
        g[(i, y as usize)] -= 1.0;
    }
    g /= b;
    let l = s.layers();
    let mut grads = Vec::with_capacity(l);
    for k in (0..l).rev() {
        let below = if k == 0 { x } else { &out[k - 1] };
        let gw = below.transpose() * &g;
        let gb = DVector::from_iterator(g.ncols(), g.column_iter().map(|c| c.sum()));
        if k > 0 {
            let mut back = &g * s.weights[k].values().transpose();
            back.zip_apply(&pre[k - 1], |d, u| *d *= s.activation.derivative(u));
            g = back;
        }
        grads.push(LayerGradient { weights: gw, bias: gb });
    }
    grads.reverse();
    Ok((loss / b, grads))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub record_every: usize,
    /// Seeds the per-epoch shuffling.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            lr: 0.05,
            batch: 64,
            record_every: 10,
            seed: 0,
        }
    }
}

fn labels_of(ds: &Dataset) -> Result<&[u32]> {
    ds.labels
        .as_deref()
        .ok_or_else(|| Error::InvalidInput("training needs a labelled dataset".into()))
}

fn evaluate(s: &mut NetworkSnapshot, train: &Dataset, test: Option<&Dataset>) -> Result<()> {
    s.train_accuracy = Some(accuracy(s, &train.inputs, labels_of(train)?)?);
    s.test_accuracy = match test {
        Some(t) => Some(accuracy(s, &t.inputs, labels_of(t)?)?),
        None => None,
    };
    Ok(())
}

/// Minibatch SGD on softmax cross-entropy.
///
/// Returns the starting snapshot followed by one snapshot every
/// `record_every` epochs (and always the last epoch). Accuracies are
/// evaluated at every recorded snapshot.
pub fn train(
    start: &NetworkSnapshot,
    train_set: &Dataset,
    test_set: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<Vec<NetworkSnapshot>> {
    if cfg.batch == 0 || cfg.record_every == 0 {
        return Err(Error::InvalidParameter("batch and record_every must be ≥ 1".into()));
    }
    if !(cfg.lr >= 0.0 && cfg.lr.is_finite()) {
        return Err(Error::InvalidParameter(format!("learning rate {} is invalid", cfg.lr)));
    }
    let labels = labels_of(train_set)?;
    check_inputs(start, &train_set.inputs)?;

    let mut current = start.clone();
    evaluate(&mut current, train_set, test_set)?;
    let mut out = vec![current.clone()];
    let mut shuffler = GaussianStream::new(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.samples()).collect();
    let d = train_set.features();

    for epoch in 1..=cfg.epochs {
        order.shuffle(shuffler.rng_mut());
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch) {
            let xb = DMatrix::from_fn(chunk.len(), d, |i, j| train_set.inputs[(chunk[i], j)]);
            let yb: Vec<u32> = chunk.iter().map(|&i| labels[i]).collect();
            let (loss, grads) = loss_and_gradients(&current, &xb, &yb)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            total += loss;
            batches += 1;
            for (k, g) in grads.iter().enumerate() {
                let lr = cfg.lr;
                current.weights[k].values_mut().zip_apply(&g.weights, |w, d| *w -= lr * d);
                current.biases[k].axpy(-cfg.lr, &g.bias, 1.0);
            }
        }
        let mean_loss = total / batches as f64;
        let finite = current.weights.iter().all(|w| w.values().iter().all(|v| v.is_finite()));
        if !mean_loss.is_finite() || !finite {
            return Err(Error::Divergence { epoch, loss: mean_loss });
        }
        current.epoch = epoch;
        current.train_loss = Some(mean_loss);
        if epoch % cfg.record_every == 0 || epoch == cfg.epochs {
            evaluate(&mut current, train_set, test_set)?;
            out.push(current.clone());
        }
    }
    Ok(out)
}

/// Train/test accuracy gap with penultimate-layer correlations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationRecord {
    pub epoch: usize,
    pub gap: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// NC of the last hidden layer on the training inputs.
    pub nc_penultimate: f64,
    /// Signed WC of the weights feeding the last hidden layer.
    pub wc_penultimate: f64,
}

pub fn generalization_gap(s: &NetworkSnapshot, train_set: &Dataset, test_set: &Dataset) -> Result<GeneralizationRecord> {
    let train_acc = accuracy(s, &train_set.inputs, labels_of(train_set)?)?;
    let test_acc = accuracy(s, &test_set.inputs, labels_of(test_set)?)?;
    let (nc, wc) = if s.layers() >= 2 {
        let p = s.layers() - 1;
        let t = forward_record(s, &train_set.inputs, p)?;
        let nc = if t.neurons() >= 2 { neuronal_correlation(&t)?.value } else { 0.0 };
        let w = &s.weights[p - 1];
        let wc = if w.outputs() >= 2 { weight_correlation(w, false)?.value } else { 0.0 };
        (nc, wc)
    } else {
        (0.0, 0.0)
    };
    Ok(GeneralizationRecord {
        epoch: s.epoch,
        gap: train_acc - test_acc,
        train_accuracy: train_acc,
        test_accuracy: test_acc,
        nc_penultimate: nc,
        wc_penultimate: wc,
    })
}

/// Quartiles of the pairwise column cosines of one weight matrix.
pub fn cosine_quartiles(w: &WeightMatrix) -> Result<[f64; 3]> {
    let c = pairwise_cosines(w)?;
    if c.is_empty() {
        return Err(Error::InvalidParameter("need at least two columns".into()));
    }
    Ok([0.25, 0.5, 0.75].map(|q| crate::linalg::quantile(&c, q).expect("nonempty")))
}

/// `(W, b)` of the single affine map an identity-activation network computes.
pub fn composed_affine(s: &NetworkSnapshot) -> (DMatrix<f64>, DVector<f64>) {
    let mut w = s.weights[0].values().clone();
    let mut b = s.biases[0].clone();
    for (wl, bl) in s.weights.iter().zip(&s.biases).skip(1) {
        b = wl.values().transpose() * b + bl;
        w = w * wl.values();
    }
    (w, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub m: usize,
    pub n: usize,
    pub init: Init,
    pub mean_abs_wc: f64,
    pub std_abs_wc: f64,
    pub seeds: usize,
}

/// Mean absolute-cosine WC of freshly initialised `m → n` layers over every
/// `(m, n, init)` combination, averaged over `seeds`.
pub fn wc_vs_structure_sweep(
    m_range: &[usize],
    n_range: &[usize],
    inits: &[Init],
    seeds: &[u64],
) -> Result<Vec<SweepRow>> {
    if m_range.is_empty() || n_range.is_empty() || inits.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidParameter("sweep ranges must be nonempty".into()));
    }
    if let Some(&n) = n_range.iter().find(|&&n| n < 2) {
        return Err(Error::InvalidParameter(format!(
            "weight correlation needs n ≥ 2 neurons, got n = {n}"
        )));
    }
    let mut rows = Vec::new();
    for &init in inits {
        for &m in m_range {
            for &n in n_range {
                let vals = seeds
                    .iter()
                    .map(|&seed| {
                        let spec = NetworkSpec::new(vec![m, n], Activation::Identity, init, seed)?;
                        Ok(weight_correlation(&initialize(&spec).weights[0], true)?.value)
                    })
                    .collect::<Result<Vec<f64>>>()?;
                let k = vals.len() as f64;
                let mean = vals.iter().sum::<f64>() / k;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
                rows.push(SweepRow {
                    m,
                    n,
                    init,
                    mean_abs_wc: mean,
                    std_abs_wc: var.sqrt(),
                    seeds: seeds.len(),
                });
            }
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Snapshot container
// ---------------------------------------------------------------------------

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"CENT";
pub const SNAPSHOT_VERSION: u32 = 1;

/// Encodes a snapshot.
///
/// Layout, all little-endian:
///
/// ```text
/// 0   magic "CENT"
/// 4   u32 format version
/// 8   u64 epoch
/// 16  u8 activation (0 identity, 1 relu, 2 tanh), 3 zero bytes
/// 20  f64 train accuracy   (NaN when absent)
/// 28  f64 test accuracy    (NaN when absent)
/// 36  f64 train loss       (NaN when absent)
/// 44  u32 layer count L
/// 48  L × (weight matrix, bias matrix)
/// ```
///
/// Each matrix is `u32 rows, u32 cols` followed by `rows × cols` f64 values
/// in row-major order; a bias is stored as an `n × 1` matrix.
pub fn encode_snapshot(s: &NetworkSnapshot) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(SNAPSHOT_MAGIC);
    buf.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(s.epoch as u64).to_le_bytes());
    buf.extend_from_slice(&[s.activation.code(), 0, 0, 0]);
    for v in [s.train_accuracy, s.test_accuracy, s.train_loss] {
        buf.extend_from_slice(&v.unwrap_or(f64::NAN).to_le_bytes());
    }
    buf.extend_from_slice(&(s.layers() as u32).to_le_bytes());
    let mut put = |rows: usize, cols: usize, at: &dyn Fn(usize, usize) -> f64| {
        buf.extend_from_slice(&(rows as u32).to_le_bytes());
        buf.extend_from_slice(&(cols as u32).to_le_bytes());
        for i in 0..rows {
            for j in 0..cols {
                buf.extend_from_slice(&at(i, j).to_le_bytes());
            }
        }
    };
    for (w, b) in s.weights.iter().zip(&s.biases) {
        let wv = w.values();
        put(wv.nrows(), wv.ncols(), &|i, j| wv[(i, j)]);
        put(b.len(), 1, &|i, _| b[i]);
    }
    buf
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Snapshot(format!(
                "truncated at offset {}, needed {n} more bytes",
                self.pos
            ))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn matrix(&mut self) -> Result<DMatrix<f64>> {
        let rows = self.u32()? as usize;
        let cols = self.u32()? as usize;
        let count = rows.checked_mul(cols).filter(|c| c.checked_mul(8).is_some()).ok_or_else(|| {
            Error::Snapshot(format!("matrix shape {rows}x{cols} at offset {} overflows", self.pos))
        })?;
        let raw = self.take(count * 8)?;
        let vals = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        Ok(DMatrix::from_row_iterator(rows, cols, vals))
    }
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<NetworkSnapshot> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4)? != SNAPSHOT_MAGIC {
        return Err(Error::Snapshot("bad magic at offset 0 (expected \"CENT\")".into()));
    }
    let version = c.u32()?;
    if version != SNAPSHOT_VERSION {
        return Err(Error::Snapshot(format!("unsupported format version {version}")));
    }
    let epoch = c.u64()? as usize;
    let flags = c.take(4)?;
    let activation = Activation::from_code(flags[0])
        .ok_or_else(|| Error::Snapshot(format!("unknown activation code {} at offset 16", flags[0])))?;
    let opt = |v: f64| if v.is_nan() { None } else { Some(v) };
    let train_accuracy = opt(c.f64()?);
    let test_accuracy = opt(c.f64()?);
    let train_loss = opt(c.f64()?);
    let layers = c.u32()? as usize;
    if layers == 0 {
        return Err(Error::Snapshot("snapshot has no layers".into()));
    }
    let mut weights = Vec::with_capacity(layers.min(1024));
    let mut biases = Vec::with_capacity(layers.min(1024));
    for l in 0..layers {
        let w = c.matrix()?;
        let b = c.matrix()?;
        if b.ncols() != 1 || b.nrows() != w.ncols() {
            return Err(Error::Snapshot(format!(
                "layer {}: bias shape {}x{} does not fit weights {}x{}",
                l + 1,
                b.nrows(),
                b.ncols(),
                w.nrows(),
                w.ncols()
            )));
        }
        if let Some(prev) = weights.last().map(|p: &WeightMatrix| p.outputs()) {
            if prev != w.nrows() {
                return Err(Error::Snapshot(format!(
                    "layer {} expects {} inputs but the previous layer has {prev} outputs",
                    l + 1,
                    w.nrows()
                )));
            }
        }
        weights.push(WeightMatrix::new(w)?.with_layer(l + 1));
        biases.push(b.column(0).into_owned());
    }
    if c.pos != bytes.len() {
        return Err(Error::Snapshot(format!(
            "{} trailing bytes after offset {}",
            bytes.len() - c.pos,
            c.pos
        )));
    }
    Ok(NetworkSnapshot {
        epoch,
        activation,
        weights,
        biases,
        train_accuracy,
        test_accuracy,
        train_loss,
    })
}

pub fn write_snapshot(s: &NetworkSnapshot, path: &Path) -> Result<()> {
    std::fs::write(path, encode_snapshot(s)).map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<NetworkSnapshot> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_snapshot(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Source;

    fn blobs(n: usize, seed: u64) -> Dataset {
        let mut g = GaussianStream::new(seed);
        let mut x = DMatrix::zeros(n, 2);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let c = (i % 2) as u32;
            let centre = if c == 0 { -2.0 } else { 2.0 };
            x[(i, 0)] = centre + 0.5 * g.next_normal();
            x[(i, 1)] = centre + 0.5 * g.next_normal();
            y.push(c);
        }
        Dataset::new(x, Some(y), Source::Synthetic).unwrap()
    }

    #[test]
    fn notation_roundtrip() {
        let spec = NetworkSpec::parse("I-20-20-20-20-20-O", 784, 10, Activation::Identity, Init::Xavier, 1).unwrap();
        assert_eq!(spec.layer_sizes, vec![784, 20, 20, 20, 20, 20, 10]);
        assert_eq!(spec.notation(), "I-20-20-20-20-20-O");
        let again = NetworkSpec::parse(&spec.notation(), 784, 10, Activation::Identity, Init::Xavier, 1).unwrap();
        assert_eq!(again, spec);
        assert_eq!(
            NetworkSpec::parse("784-110-10-10", 0, 0, Activation::Relu, Init::Xavier, 0).unwrap().layer_sizes,
            vec![784, 110, 10, 10]
        );
        assert!(NetworkSpec::parse("I-x-O", 3, 2, Activation::Relu, Init::Xavier, 0).is_err());
        assert!(NetworkSpec::parse("I-0-O", 3, 2, Activation::Relu, Init::Xavier, 0).is_err());
        assert!(NetworkSpec::parse("I", 3, 2, Activation::Relu, Init::Xavier, 0).is_err());
    }

    #[test]
    fn init_is_deterministic_with_expected_variances() {
        let spec = NetworkSpec::new(vec![100, 100], Activation::Identity, Init::Xavier, 9).unwrap();
        let a = initialize(&spec);
        assert_eq!(a, initialize(&spec));
        let var = |s: &NetworkSnapshot| {
            let v = s.weights[0].values();
            let mean = v.mean();
            v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64
        };
        assert!((var(&a) / 0.01 - 1.0).abs() < 0.1);
        let he = initialize(&NetworkSpec::new(vec![50, 200], Activation::Identity, Init::HeNormal, 9).unwrap());
        assert!((var(&he) / 0.04 - 1.0).abs() < 0.1);
        let tn = initialize(&NetworkSpec::new(vec![50, 200], Activation::Identity, Init::TruncatedNormal, 9).unwrap());
        assert!(tn.weights[0].values().iter().all(|v| v.abs() <= 0.1));
        let r = initialize(&NetworkSpec::new(vec![50, 200], Activation::Identity, Init::Random, 9).unwrap());
        assert!(r.weights[0].values().iter().all(|v| v.abs() <= 0.05));
        assert!(a.biases.iter().all(|b| b.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn identity_network_layer_one_is_exact_affine() {
        let spec = NetworkSpec::new(vec![3, 4, 2], Activation::Identity, Init::Xavier, 2).unwrap();
        let mut s = initialize(&spec);
        s.biases[0] = DVector::from_vec(vec![0.1, -0.2, 0.3, 0.0]);
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, -1.0, 0.5, 0.0]);
        let t = forward_record(&s, &x, 1).unwrap();
        let expected = affine(&x, s.weights[0].values(), &s.biases[0]);
        assert_eq!(t.values(), &expected);
        assert!(forward_record(&s, &x, 0).is_err());
        assert!(forward_record(&s, &x, 3).is_err());
    }

    #[test]
    fn activation_ranges() {
        let x = DMatrix::from_fn(50, 4, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
        for (act, ok) in [
            (Activation::Relu, (|v: f64| v >= 0.0) as fn(f64) -> bool),
            (Activation::Tanh, |v: f64| v > -1.0 && v < 1.0),
        ] {
            let s = initialize(&NetworkSpec::new(vec![4, 8, 3], act, Init::HeNormal, 1).unwrap());
            assert!(forward_record(&s, &x, 1).unwrap().values().iter().all(|&v| ok(v)));
        }
    }

    #[test]
    fn zero_learning_rate_keeps_weights() {
        let data = blobs(64, 1);
        let s = initialize(&NetworkSpec::new(vec![2, 4, 2], Activation::Tanh, Init::Xavier, 3).unwrap());
        let cfg = TrainConfig { epochs: 3, lr: 0.0, batch: 16, record_every: 1, seed: 0 };
        let snaps = train(&s, &data, None, &cfg).unwrap();
        assert_eq!(snaps.len(), 4);
        assert!(snaps.iter().all(|t| t.weights == s.weights && t.biases == s.biases));
    }

    #[test]
    fn separable_blobs_are_learned_and_loss_decreases() {
        let data = blobs(200, 5);
        let s = initialize(&NetworkSpec::new(vec![2, 2], Activation::Identity, Init::Xavier, 4).unwrap());
        let cfg = TrainConfig { epochs: 200, lr: 0.05, batch: 64, record_every: 1, seed: 1 };
        let snaps = train(&s, &data, None, &cfg).unwrap();
        assert_eq!(snaps.last().unwrap().train_accuracy, Some(1.0));
        let cfg = TrainConfig { batch: 200, ..cfg };
        let snaps = train(&s, &data, None, &cfg).unwrap();
        let losses: Vec<f64> = snaps[1..].iter().map(|s| s.train_loss.unwrap()).collect();
        for w in losses.windows(11) {
            assert!(w[10] <= w[0], "loss rose over a 10-epoch window: {} -> {}", w[0], w[10]);
        }
    }

    #[test]
    fn divergence_names_epoch() {
        let mut data = blobs(64, 2);
        data.inputs *= 1e300;
        let s = initialize(&NetworkSpec::new(vec![2, 8, 8, 2], Activation::Identity, Init::Xavier, 4).unwrap());
        let cfg = TrainConfig { epochs: 5, lr: 1.0, batch: 8, record_every: 1, seed: 1 };
        match train(&s, &data, None, &cfg) {
            Err(Error::Divergence { epoch, .. }) => assert!(epoch >= 1),
            other => panic!("expected divergence, got {:?}", other.map(|v| v.len())),
        }
    }

    #[test]
    fn gap_is_zero_on_identical_sets() {
        let data = blobs(100, 3);
        let s = initialize(&NetworkSpec::new(vec![2, 5, 2], Activation::Relu, Init::HeNormal, 8).unwrap());
        let rec = generalization_gap(&s, &data, &data).unwrap();
        assert_eq!(rec.gap, 0.0);
        assert!(rec.nc_penultimate >= 0.0 && rec.nc_penultimate <= 1.0);
    }

    #[test]
    fn composed_affine_matches_forward() {
        let spec = NetworkSpec::new(vec![4, 6, 5, 3], Activation::Identity, Init::Xavier, 12).unwrap();
        let mut s = initialize(&spec);
        for (k, b) in s.biases.iter_mut().enumerate() {
            b.iter_mut().enumerate().for_each(|(i, v)| *v = 0.1 * (i + k) as f64);
        }
        let x = DMatrix::from_fn(7, 4, |i, j| (i as f64 - 3.0) * 0.3 + j as f64);
        let (w, b) = composed_affine(&s);
        let diff = logits(&s, &x).unwrap() - affine(&x, &w, &b);
        assert!(diff.abs().max() < 1e-10);
    }

    #[test]
    fn snapshot_roundtrip_and_corruption() {
        let spec = NetworkSpec::new(vec![3, 4, 2], Activation::Tanh, Init::HeNormal, 3).unwrap();
        let mut s = initialize(&spec);
        s.epoch = 17;
        s.train_accuracy = Some(0.75);
        let bytes = encode_snapshot(&s);
        assert_eq!(&bytes[..4], b"CENT");
        assert_eq!(decode_snapshot(&bytes).unwrap(), s);
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_snapshot(&bad), Err(Error::Snapshot(_))));
        assert!(decode_snapshot(&bytes[..bytes.len() - 3]).is_err());
        let mut long = bytes.clone();
        long.push(0);
        assert!(decode_snapshot(&long).is_err());
        let mut v2 = bytes;
        v2[4] = 2;
        assert!(decode_snapshot(&v2).is_err());
    }

    #[test]
    fn sweep_rejects_single_neuron() {
        assert!(wc_vs_structure_sweep(&[10], &[1], &[Init::Xavier], &[0]).is_err());
        let rows = wc_vs_structure_sweep(&[10, 20], &[5], &Init::ALL, &[0, 1, 2]).unwrap();
        assert_eq!(rows.len(), 8);
        assert!(rows.iter().all(|r| r.mean_abs_wc > 0.0 && r.mean_abs_wc < 1.0));
    }
}
