//! Correlation measures over layers of a feed-forward network.
//!
//! * [`neuronal_correlation`]: mean absolute Pearson correlation over ordered
//!   neuron pairs of one layer's activations.
//! * [`weight_correlation`]: mean cosine similarity over ordered pairs of
//!   weight-matrix columns (signed, with an absolute-value variant).
//! * [`preactivation_correlation`]: the same aggregate as NC, evaluated in
//!   closed form on the pre-activations `U = Wᵀ T_{l−1}` from the previous
//!   layer's covariance.
//! * [`epsilon_gap`]: `|NC(T_l) − PreNC(U_l)|`, the correlation shift
//!   introduced by the nonlinearity.
//! * [`structure_correlation_coefficient`]: a purely structural statistic
//!   of how many parents neurons share.
//!
//! All pairwise sums run in a fixed `(i, j)` order so results are
//! bit-reproducible.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard deviations below this are treated as a constant signal.
pub const DEGENERATE_STD: f64 = 1e-12;

/// Samples-by-neurons activations of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationMatrix {
    values: DMatrix<f64>,
    pub layer_id: usize,
    pub epoch: usize,
}

impl ActivationMatrix {
    /// Requires at least two samples and finite entries.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() < 2 {
            return Err(Error::InvalidParameter(format!(
                "activation matrix needs at least 2 samples, got {}",
                values.nrows()
            )));
        }
        if values.ncols() == 0 {
            return Err(Error::InvalidParameter(
                "activation matrix has no neurons".into(),
            ));
        }
        if let Some((idx, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let (r, c) = (idx % values.nrows(), idx / values.nrows());
            return Err(Error::InvalidInput(format!(
                "non-finite activation {v} at sample {r}, neuron {c}"
            )));
        }
        Ok(Self {
            values,
            layer_id: 0,
            epoch: 0,
        })
    }

    pub fn with_origin(mut self, layer_id: usize, epoch: usize) -> Self {
        self.layer_id = layer_id;
        self.epoch = epoch;
        self
    }

    pub fn samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn neurons(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    /// Outputs of neuron `i` across all samples.
    pub fn neuron(&self, i: usize) -> &[f64] {
        let s = self.values.nrows();
        &self.values.as_slice()[i * s..(i + 1) * s]
    }
}

/// An `m × n` weight matrix whose columns feed the `n` neurons of a layer.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    values: DMatrix<f64>,
    pub layer_id: usize,
}

impl WeightMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite weight entry".into()));
        }
        Ok(Self {
            values,
            layer_id: 0,
        })
    }

    pub fn with_layer(mut self, layer_id: usize) -> Self {
        self.layer_id = layer_id;
        self
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.values
    }

    pub fn inputs(&self) -> usize {
        self.values.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.values.ncols()
    }

    pub fn column(&self, i: usize) -> &[f64] {
        let m = self.values.nrows();
        &self.values.as_slice()[i * m..(i + 1) * m]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Measure {
    #[serde(rename = "NC")]
    Nc,
    #[serde(rename = "WC")]
    Wc,
    #[serde(rename = "PreNC")]
    PreNc,
    Epsilon,
    Gamma,
}

/// Result of one layer-level correlation measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub value: f64,
    pub measure: Measure,
    /// Ordered pairs (or neurons, for Γ) that entered the average.
    pub pair_count: usize,
    /// Ordered pairs whose correlation was undefined and contributed 0.
    pub skipped_pairs: usize,
}

/// Pearson correlation of two equally long samples.
///
/// Returns `None` when either sample is (numerically) constant, since the
/// coefficient is undefined there.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "pearson",
            expected: x.len().to_string(),
            found: y.len().to_string(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InvalidParameter(
            "pearson needs at least 2 observations".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    let denom = n - 1.0;
    let (sdx, sdy) = ((sxx / denom).sqrt(), (syy / denom).sqrt());
    if sdx < DEGENERATE_STD || sdy < DEGENERATE_STD {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)))
}

/// Full neuron-by-neuron Pearson matrix; `None` marks undefined entries.
pub fn correlation_matrix(t: &ActivationMatrix) -> Vec<Vec<Option<f64>>> {
    let n = t.neurons();
    let s = t.samples() as f64;
    let mut centred: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut norms = Vec::with_capacity(n);
    let mut degenerate = Vec::with_capacity(n);
    for i in 0..n {
        let col = t.neuron(i);
        let mean = col.iter().sum::<f64>() / s;
        let c: Vec<f64> = col.iter().map(|v| v - mean).collect();
        let ss: f64 = c.iter().map(|v| v * v).sum();
        degenerate.push((ss / (s - 1.0)).sqrt() < DEGENERATE_STD);
        norms.push(ss.sqrt());
        centred.push(c);
    }
    let mut out = vec![vec![None; n]; n];
    for i in 0..n {
        if degenerate[i] {
            continue;
        }
        out[i][i] = Some(1.0);
        for j in (i + 1)..n {
            if degenerate[j] {
                continue;
            }
            let dot: f64 = centred[i].iter().zip(&centred[j]).map(|(a, b)| a * b).sum();
            let r = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            out[i][j] = Some(r);
            out[j][i] = Some(r);
        }
    }
    out
}

fn aggregate_abs(matrix: &[Vec<Option<f64>>], measure: Measure) -> CorrelationReport {
    let n = matrix.len();
    let mut sum = 0.0;
    let mut skipped = 0;
    for (i, row) in matrix.iter().enumerate() {
        for (j, entry) in row.iter().enumerate() {
            if i == j {
                continue;
            }
            match entry {
                Some(r) => sum += r.abs(),
                None => skipped += 1,
            }
        }
    }
    let pairs = n * (n - 1);
    CorrelationReport {
        value: sum / pairs as f64,
        measure,
        pair_count: pairs,
        skipped_pairs: skipped,
    }
}

/// Mean absolute Pearson correlation over ordered pairs of distinct neurons.
///
/// Constant neurons make their pairs undefined; those pairs contribute 0
/// and are counted in `skipped_pairs`.
pub fn neuronal_correlation(t: &ActivationMatrix) -> Result<CorrelationReport> {
    if t.neurons() < 2 {
        return Err(Error::InvalidParameter(format!(
            "neuronal correlation needs at least 2 neurons, got {}",
            t.neurons()
        )));
    }
    Ok(aggregate_abs(&correlation_matrix(t), Measure::Nc))
}

/// Cosines between distinct columns, in `(i, j)` order with `i < j`.
pub fn pairwise_cosines(w: &WeightMatrix) -> Result<Vec<f64>> {
    let n = w.outputs();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "weight correlation needs at least 2 columns, got {n}"
        )));
    }
    let norms: Vec<f64> = (0..n)
        .map(|i| w.column(i).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    if let Some(column) = norms.iter().position(|&v| v == 0.0) {
        return Err(Error::DegenerateColumn { column });
    }
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let dot: f64 = w.column(i).iter().zip(w.column(j)).map(|(a, b)| a * b).sum();
            out.push((dot / (norms[i] * norms[j])).clamp(-1.0, 1.0));
        }
    }
    Ok(out)
}

/// Mean cosine similarity over ordered pairs of distinct columns.
///
/// Signed by default; `absolute` averages `|cos|` instead.
pub fn weight_correlation(w: &WeightMatrix, absolute: bool) -> Result<CorrelationReport> {
    let n = w.outputs();
    let cosines = pairwise_cosines(w)?;
    // each unordered pair appears twice among the ordered pairs
    let sum: f64 = cosines
        .iter()
        .map(|&c| if absolute { 2.0 * c.abs() } else { 2.0 * c })
        .sum();
    let pairs = n * (n - 1);
    Ok(CorrelationReport {
        value: sum / pairs as f64,
        measure: Measure::Wc,
        pair_count: pairs,
        skipped_pairs: 0,
    })
}

fn check_covariance(sigma: &DMatrix<f64>, m: usize) -> Result<()> {
    if sigma.nrows() != sigma.ncols() || sigma.nrows() != m {
        return Err(Error::DimensionMismatch {
            context: "previous-layer covariance",
            expected: format!("{m}x{m}"),
            found: format!("{}x{}", sigma.nrows(), sigma.ncols()),
        });
    }
    Ok(())
}

/// Covariance of two pre-activations `U_i = W_iᵀ T`, `U_j = W_jᵀ T` given
/// `Σ = cov(T)`: `tr(W_i W_jᵀ Σ) = W_jᵀ Σ W_i`.
pub fn preactivation_covariance(wi: &[f64], wj: &[f64], sigma: &DMatrix<f64>) -> Result<f64> {
    if wi.len() != wj.len() {
        return Err(Error::DimensionMismatch {
            context: "preactivation covariance columns",
            expected: wi.len().to_string(),
            found: wj.len().to_string(),
        });
    }
    check_covariance(sigma, wi.len())?;
    let m = wi.len();
    let mut total = 0.0;
    for a in 0..m {
        let mut row = 0.0;
        for b in 0..m {
            row += sigma[(a, b)] * wi[b];
        }
        total += wj[a] * row;
    }
    Ok(total)
}

/// Covariance matrix `Wᵀ Σ W` of all pre-activations of a layer.
pub fn preactivation_covariance_matrix(
    w: &WeightMatrix,
    sigma: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_covariance(sigma, w.inputs())?;
    let mut c = w.values().transpose() * sigma * w.values();
    crate::linalg::symmetrize(&mut c);
    Ok(c)
}

/// NC of the pre-activations, computed from `W` and the previous layer's
/// covariance without touching samples.
pub fn preactivation_correlation(
    w: &WeightMatrix,
    sigma: &DMatrix<f64>,
) -> Result<CorrelationReport> {
    let n = w.outputs();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "pre-activation correlation needs at least 2 neurons, got {n}"
        )));
    }
    let c = preactivation_covariance_matrix(w, sigma)?;
    let sd: Vec<Option<f64>> = (0..n)
        .map(|i| {
            let v = c[(i, i)];
            (v > 0.0 && v.sqrt() >= DEGENERATE_STD).then(|| v.sqrt())
        })
        .collect();
    let matrix: Vec<Vec<Option<f64>>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| match (sd[i], sd[j]) {
                    (Some(a), Some(b)) => Some((c[(i, j)] / (a * b)).clamp(-1.0, 1.0)),
                    _ => None,
                })
                .collect()
        })
        .collect();
    Ok(aggregate_abs(&matrix, Measure::PreNc))
}

/// `|NC(T) − PreNC(W, Σ_prev)|`.
pub fn epsilon_gap(
    t: &ActivationMatrix,
    w: &WeightMatrix,
    sigma_prev: &DMatrix<f64>,
) -> Result<CorrelationReport> {
    if t.neurons() != w.outputs() {
        return Err(Error::DimensionMismatch {
            context: "epsilon gap",
            expected: format!("{} neurons", w.outputs()),
            found: format!("{} neurons", t.neurons()),
        });
    }
    let post = neuronal_correlation(t)?;
    let pre = preactivation_correlation(w, sigma_prev)?;
    Ok(CorrelationReport {
        value: (post.value - pre.value).abs(),
        measure: Measure::Epsilon,
        pair_count: post.pair_count,
        skipped_pairs: post.skipped_pairs + pre.skipped_pairs,
    })
}

/// Which neurons of layer `l − 1` feed each neuron of layer `l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityPattern {
    parent_sets: Vec<Vec<usize>>,
    previous_size: usize,
    pub gamma: f64,
}

impl ConnectivityPattern {
    /// Builds a pattern from explicit parent indices (0-based, `< previous_size`).
    pub fn from_parent_sets(
        sets: Vec<Vec<usize>>,
        previous_size: usize,
        gamma: f64,
    ) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma must be > 0, got {gamma}")));
        }
        let mut parent_sets = Vec::with_capacity(sets.len());
        for (i, set) in sets.into_iter().enumerate() {
            let set: BTreeSet<usize> = set.into_iter().collect();
            if set.is_empty() {
                return Err(Error::InvalidParameter(format!(
                    "neuron {i} has no parent neurons"
                )));
            }
            if let Some(&p) = set.iter().find(|&&p| p >= previous_size) {
                return Err(Error::InvalidParameter(format!(
                    "neuron {i} lists parent {p}, but the previous layer has {previous_size} neurons"
                )));
            }
            parent_sets.push(set.into_iter().collect());
        }
        if parent_sets.is_empty() {
            return Err(Error::InvalidParameter("layer has no neurons".into()));
        }
        Ok(Self {
            parent_sets,
            previous_size,
            gamma,
        })
    }

    pub fn fully_connected(m: usize, n: usize, gamma: f64) -> Result<Self> {
        Self::from_parent_sets(vec![(0..m).collect(); n], m, gamma)
    }

    /// Single-channel 1-D convolution without padding.
    pub fn conv1d(input_len: usize, width: usize, stride: usize, gamma: f64) -> Result<Self> {
        if width == 0 || stride == 0 || width > input_len {
            return Err(Error::InvalidParameter(format!(
                "conv1d needs 0 < width <= input length and stride > 0 (input {input_len}, width {width}, stride {stride})"
            )));
        }
        let outputs = (input_len - width) / stride + 1;
        let sets = (0..outputs)
            .map(|o| (o * stride..o * stride + width).collect())
            .collect();
        Self::from_parent_sets(sets, input_len, gamma)
    }

    /// Single-channel 2-D convolution without padding, square stride.
    pub fn conv2d(
        height: usize,
        width: usize,
        filter: (usize, usize),
        stride: usize,
        gamma: f64,
    ) -> Result<Self> {
        let (fh, fw) = filter;
        if fh == 0 || fw == 0 || stride == 0 || fh > height || fw > width {
            return Err(Error::InvalidParameter(format!(
                "conv2d filter {fh}x{fw} with stride {stride} does not fit a {height}x{width} input"
            )));
        }
        let out_h = (height - fh) / stride + 1;
        let out_w = (width - fw) / stride + 1;
        let mut sets = Vec::with_capacity(out_h * out_w);
        for oy in 0..out_h {
            for ox in 0..out_w {
                let mut set = Vec::with_capacity(fh * fw);
                for dy in 0..fh {
                    for dx in 0..fw {
                        set.push((oy * stride + dy) * width + ox * stride + dx);
                    }
                }
                sets.push(set);
            }
        }
        Self::from_parent_sets(sets, height * width, gamma)
    }

    pub fn parent_sets(&self) -> &[Vec<usize>] {
        &self.parent_sets
    }

    pub fn previous_size(&self) -> usize {
        self.previous_size
    }

    pub fn neurons(&self) -> usize {
        self.parent_sets.len()
    }
}

fn sorted_intersection_len(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// Γ: mean over neurons of (shared-parent count summed over all neurons,
/// including itself) divided by γ times the number of neurons it shares any
/// parent with.
pub fn structure_correlation_coefficient(pattern: &ConnectivityPattern) -> CorrelationReport {
    let sets = pattern.parent_sets();
    let n = sets.len();
    let mut total = 0.0;
    for a in sets {
        let (mut shared, mut linked) = (0usize, 0usize);
        for b in sets {
            let g = sorted_intersection_len(a, b);
            shared += g;
            linked += usize::from(g > 0);
        }
        // linked >= 1 because every neuron shares its own (nonempty) parents
        total += shared as f64 / (pattern.gamma * linked as f64);
    }
    CorrelationReport {
        value: total / n as f64,
        measure: Measure::Gamma,
        pair_count: n,
        skipped_pairs: 0,
    }
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start;
        while end + 1 < idx.len() && v[idx[end + 1]] == v[idx[start]] {
            end += 1;
        }
        let rank = (start + end) as f64 / 2.0 + 1.0;
        for &k in &idx[start..=end] {
            ranks[k] = rank;
        }
        start = end + 1;
    }
    ranks
}

/// Spearman rank correlation (Pearson on average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Empirical covariance of a layer's activations, the `Σ_{l−1}` fed to
/// [`preactivation_correlation`].
pub fn activation_covariance(t: &ActivationMatrix) -> DMatrix<f64> {
    crate::linalg::covariance(t.values())
}

/// Column of a weight matrix as an owned vector.
pub fn weight_column(w: &WeightMatrix, i: usize) -> DVector<f64> {
    DVector::from_column_slice(w.column(i))
}
