//! Entropy estimators.
//!
//! Two per-dimension estimators (equal-width binning and the
//! Kozachenko–Leonenko nearest-neighbour estimator) are combined in two ways:
//! summed over the raw neurons (the independence bound, which overestimates
//! the joint entropy whenever neurons are correlated) and summed over the
//! dimensions of a kernel feature map, where the coordinates are mutually
//! uncorrelated. All values are in nats.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::correlation::{neuronal_correlation, ActivationMatrix};
use crate::error::{Error, Result};
use crate::kernel::{self, KernelKind, WidthSelection, RANK_TOLERANCE};
use crate::linalg;

pub const DEFAULT_BINS: usize = 30;
pub const DEFAULT_K: usize = 3;
/// Default kernel width as a multiple of the median pairwise distance.
pub const DEFAULT_WIDTH_MULTIPLE: f64 = 10.0;
/// Relative magnitude of the jitter that breaks exact duplicates before kNN.
pub const JITTER_SCALE: f64 = 1e-10;
const JITTER_SEED: u64 = 0x6a17_7e25;
/// Width selection runs one eigendecomposition per grid point, so it is done
/// on at most this many (evenly strided) samples.
pub const SELECTION_SAMPLE_CAP: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Estimator {
    Binning { bins: usize },
    Knn { k: usize },
}

impl Default for Estimator {
    fn default() -> Self {
        Estimator::Knn { k: DEFAULT_K }
    }
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Binning { .. } => "binning",
            Estimator::Knn { .. } => "knn",
        }
    }

    /// Entropy of a single variable.
    pub fn estimate_1d(&self, x: &[f64]) -> Result<f64> {
        match *self {
            Estimator::Binning { bins } => binned_entropy_1d(x, bins),
            Estimator::Knn { k } => knn_entropy_1d(x, k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Original,
    Projected,
}

/// Extra facts about the projected-space computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionDiagnostics {
    pub kernel: KernelKind,
    pub sigma: f64,
    pub samples_used: usize,
    /// Dimensions kept (eigenvalue above the rank tolerance).
    pub retained_rank: usize,
    /// Share of the centred Gram trace carried by the kept dimensions.
    pub retained_mass: f64,
    /// Mean |Pearson| between raw neurons.
    pub correlation_before: f64,
    /// Mean |Pearson| between kept feature dimensions.
    pub correlation_after: f64,
    pub leading_eigenvalues: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width_selection: Option<WidthSelection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub value: f64,
    pub estimator: Estimator,
    pub space: Space,
    pub per_dimension: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<ProjectionDiagnostics>,
}

impl EntropyEstimate {
    fn from_parts(per_dimension: Vec<f64>, estimator: Estimator, space: Space) -> Self {
        Self {
            value: per_dimension.iter().sum(),
            estimator,
            space,
            per_dimension,
            diagnostics: None,
        }
    }
}

/// Discrete entropy of an equal-width histogram over `[min x, max x]`.
pub fn binned_entropy_1d(x: &[f64], bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 bins, got {bins}")));
    }
    if x.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 values for binning, got {}",
            x.len()
        )));
    }
    let (lo, hi) = min_max(x);
    if hi <= lo {
        return Ok(0.0);
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in x {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let n = x.len() as f64;
    Ok(counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum())
}

fn min_max(x: &[f64]) -> (f64, f64) {
    x.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

fn ln_unit_ball_volume(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    h * std::f64::consts::PI.ln() - ln_gamma(h + 1.0)
}

fn check_knn(n: usize, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if n <= k {
        return Err(Error::InvalidParameter(format!(
            "kNN entropy with k = {k} needs more than {k} samples, got {n}"
        )));
    }
    Ok(())
}

fn jitter(values: &mut [f64], range: f64, rng: &mut Pcg64) {
    let amp = JITTER_SCALE * range;
    for v in values {
        *v += amp * rng.random_range(-1.0..1.0);
    }
}

/// Distance to the k-th nearest neighbour of every point of a sorted slice.
fn kth_gaps_sorted(x: &[f64], k: usize) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let (mut l, mut r) = (i as isize - 1, i + 1);
            let mut last = 0.0;
            for _ in 0..k {
                let dl = if l >= 0 { x[i] - x[l as usize] } else { f64::INFINITY };
                let dr = if r < n { x[r] - x[i] } else { f64::INFINITY };
                if dl <= dr {
                    last = dl;
                    l -= 1;
                } else {
                    last = dr;
                    r += 1;
                }
            }
            last
        })
        .collect()
}

/// Kozachenko–Leonenko estimate for a single variable.
pub fn knn_entropy_1d(x: &[f64], k: usize) -> Result<f64> {
    check_knn(x.len(), k)?;
    let (lo, hi) = min_max(x);
    if !(hi > lo) {
        return Err(Error::Degenerate(
            "kNN entropy of a constant variable is unbounded below".into(),
        ));
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        let mut rng = Pcg64::seed_from_u64(JITTER_SEED);
        jitter(&mut sorted, hi - lo, &mut rng);
        sorted.sort_by(f64::total_cmp);
    }
    let eps = kth_gaps_sorted(&sorted, k);
    Ok(kl_formula(&eps, 1, k))
}

fn kl_formula(eps: &[f64], d: usize, k: usize) -> f64 {
    let n = eps.len();
    let mean_log = eps.iter().map(|e| e.ln()).sum::<f64>() / n as f64;
    digamma(n as f64) - digamma(k as f64) + ln_unit_ball_volume(d) + d as f64 * mean_log
}

/// Kozachenko–Leonenko estimate `ψ(n) − ψ(k) + ln V_d + (d/n) Σ ln ε_i` with
/// Euclidean balls, for samples in the rows of `x`.
pub fn knn_entropy(x: &DMatrix<f64>, k: usize) -> Result<f64> {
    let (n, d) = x.shape();
    if d == 0 {
        return Err(Error::InvalidParameter("kNN entropy needs at least one dimension".into()));
    }
    if d == 1 {
        return knn_entropy_1d(x.as_slice(), k);
    }
    check_knn(n, k)?;
    let ranges: Vec<f64> = x
        .column_iter()
        .map(|c| {
            let (lo, hi) = min_max(c.as_slice());
            hi - lo
        })
        .collect();
    if ranges.iter().all(|&r| r <= 0.0) {
        return Err(Error::Degenerate("all samples are identical".into()));
    }
    let mut rows: Vec<Vec<f64>> = x.row_iter().map(|r| r.iter().copied().collect()).collect();
    let mut eps = kth_distances(&rows, k);
    if eps.iter().any(|&e| e == 0.0) {
        let mut rng = Pcg64::seed_from_u64(JITTER_SEED);
        let scale = ranges.iter().copied().fold(0.0, f64::max);
        for row in &mut rows {
            jitter(row, scale, &mut rng);
        }
        eps = kth_distances(&rows, k);
    }
    Ok(kl_formula(&eps, d, k))
}

fn kth_distances(rows: &[Vec<f64>], k: usize) -> Vec<f64> {
    let n = rows.len();
    let mut d2 = vec![0.0; n];
    (0..n)
        .map(|i| {
            for j in 0..n {
                d2[j] = rows[i].iter().zip(&rows[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            }
            d2[i] = f64::INFINITY;
            let (_, kth, _) = d2.select_nth_unstable_by(k - 1, f64::total_cmp);
            kth.sqrt()
        })
        .collect()
}

fn columns_entropy(x: &DMatrix<f64>, cols: usize, estimator: &Estimator) -> Result<Vec<f64>> {
    (0..cols)
        .map(|j| estimator.estimate_1d(x.column(j).as_slice()))
        .collect()
}

/// Independence bound: the per-neuron entropies summed as if the neurons
/// were independent.
pub fn entropy_original(t: &ActivationMatrix, estimator: &Estimator) -> Result<EntropyEstimate> {
    let per = columns_entropy(t.values(), t.neurons(), estimator)?;
    Ok(EntropyEstimate::from_parts(per, *estimator, Space::Original))
}

/// How the kernel width is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum WidthChoice {
    Fixed { sigma: f64 },
    /// `multiple × median pairwise distance`.
    MedianMultiple { multiple: f64 },
    /// Alignment-minus-correlation search against class labels.
    Select {
        labels: Vec<u32>,
        beta: f64,
        grid: Option<Vec<f64>>,
    },
}

impl Default for WidthChoice {
    fn default() -> Self {
        WidthChoice::MedianMultiple {
            multiple: DEFAULT_WIDTH_MULTIPLE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelEmbeddingConfig {
    pub kind: KernelKind,
    pub width: WidthChoice,
    /// Number of leading eigen-dimensions kept; defaults to the neuron count.
    pub max_dims: Option<usize>,
    /// Estimate on an evenly strided subset when there are more samples.
    pub sample_cap: Option<usize>,
}

impl Default for KernelEmbeddingConfig {
    fn default() -> Self {
        Self {
            kind: KernelKind::Gaussian,
            width: WidthChoice::default(),
            max_dims: None,
            sample_cap: None,
        }
    }
}

/// Indices of an evenly strided subset of size `cap` out of `n`.
pub fn strided_subset(n: usize, cap: usize) -> Vec<usize> {
    if cap >= n {
        return (0..n).collect();
    }
    (0..cap).map(|i| i * n / cap).collect()
}

fn select_rows(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), x.ncols(), |i, j| x[(idx[i], j)])
}

/// Kernel-embedding estimate.
///
/// The samples are mapped through a Gram matrix, the matrix is double
/// centred (removing the kernel mean embedding), and its leading
/// eigen-dimensions become variables whose per-dimension entropies are
/// summed. The coordinates are mutually uncorrelated, so the sum does not
/// suffer the independence-bound inflation. For the Gaussian kernel the
/// coordinates are multiplied by σ so that, for widths well above the data
/// scale, feature distances match input distances and estimates stay in
/// input units.
pub fn entropy_kernel_embedding(
    t: &ActivationMatrix,
    cfg: &KernelEmbeddingConfig,
    estimator: &Estimator,
) -> Result<EntropyEstimate> {
    let x = t.values();
    if x.column_iter().all(|c| {
        let (lo, hi) = min_max(c.as_slice());
        hi <= lo
    }) {
        return Err(Error::Degenerate("all samples are identical".into()));
    }
    let idx = strided_subset(t.samples(), cfg.sample_cap.unwrap_or(usize::MAX));
    let sub = ActivationMatrix::new(select_rows(x, &idx))?;

    let mut selection = None;
    let sigma = match &cfg.width {
        WidthChoice::Fixed { sigma } => *sigma,
        WidthChoice::MedianMultiple { multiple } => {
            let d = kernel::median_pairwise_distance(&sub);
            if d <= 0.0 {
                return Err(Error::Degenerate("median pairwise distance is zero".into()));
            }
            multiple * d
        }
        WidthChoice::Select { labels, beta, grid } => {
            if labels.len() != t.samples() {
                return Err(Error::DimensionMismatch {
                    context: "kernel width selection labels",
                    expected: t.samples().to_string(),
                    found: labels.len().to_string(),
                });
            }
            let sel_idx = strided_subset(t.samples(), SELECTION_SAMPLE_CAP);
            let sel_x = ActivationMatrix::new(select_rows(x, &sel_idx))?;
            let sel_labels: Vec<u32> = sel_idx.iter().map(|&i| labels[i]).collect();
            let grid = match grid {
                Some(g) => g.clone(),
                None => kernel::default_width_grid(&sel_x)?,
            };
            let s = kernel::select_kernel_width(&sel_x, &sel_labels, cfg.kind, *beta, &grid)?;
            let sigma = s.sigma;
            selection = Some(s);
            sigma
        }
    };

    let gram = kernel::gram_matrix(&sub, cfg.kind, sigma)?;
    let max_dims = cfg.max_dims.unwrap_or(t.neurons()).min(sub.samples());
    let mut features = kernel::feature_map_centered(&gram, max_dims)?;
    if cfg.kind == KernelKind::Gaussian {
        features.scale_coordinates(sigma);
    }
    let rank = features.rank();
    if rank == 0 {
        return Err(Error::Degenerate(
            "kernel feature map has no dimension above the eigenvalue tolerance".into(),
        ));
    }
    let per = columns_entropy(features.coordinates(), rank, estimator)?;
    let mut est = EntropyEstimate::from_parts(per, *estimator, Space::Projected);
    let correlation_before = if t.neurons() >= 2 {
        neuronal_correlation(&sub).map(|r| r.value).unwrap_or(0.0)
    } else {
        0.0
    };
    est.diagnostics = Some(ProjectionDiagnostics {
        kernel: cfg.kind,
        sigma,
        samples_used: sub.samples(),
        retained_rank: rank,
        retained_mass: features.retained_mass(),
        correlation_before,
        correlation_after: features.dimensional_correlation(),
        leading_eigenvalues: features
            .eigenvalues()
            .iter()
            .copied()
            .filter(|&v| v > RANK_TOLERANCE)
            .collect(),
        width_selection: selection,
    });
    Ok(est)
}

/// Multivariate normal distribution parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpec {
    pub dimension: usize,
    pub covariance: DMatrix<f64>,
    pub mean: DVector<f64>,
}

impl GaussianSpec {
    pub fn new(covariance: DMatrix<f64>, mean: DVector<f64>) -> Result<Self> {
        let d = covariance.nrows();
        if d == 0 || covariance.ncols() != d || mean.len() != d {
            return Err(Error::InvalidParameter(format!(
                "covariance {}x{} and mean of length {} do not describe a distribution",
                covariance.nrows(),
                covariance.ncols(),
                mean.len()
            )));
        }
        if (&covariance - covariance.transpose()).abs().max() > 1e-12 {
            return Err(Error::InvalidParameter("covariance is not symmetric".into()));
        }
        Ok(Self {
            dimension: d,
            covariance,
            mean,
        })
    }

    /// Zero-mean `N(0, variance · I_d)`.
    pub fn isotropic(dimension: usize, variance: f64) -> Result<Self> {
        Self::new(
            DMatrix::identity(dimension, dimension) * variance,
            DVector::zeros(dimension),
        )
    }
}

/// `½ ln((2πe)^d det Σ)`.
pub fn gaussian_entropy_analytic(spec: &GaussianSpec) -> Result<f64> {
    let log_det = linalg::log_det_spd(&spec.covariance).ok_or_else(|| {
        Error::InvalidParameter("covariance is singular or not positive definite".into())
    })?;
    let d = spec.dimension as f64;
    Ok(0.5 * (d * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln() + log_det))
}
