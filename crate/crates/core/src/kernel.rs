//! Gram matrices, their eigendecomposition feature map, Gershgorin spectrum
//! bounds, kernel alignment, and kernel-width selection.
//!
//! The feature map follows the finite Mercer approximation: with
//! `K = V Λ Vᵀ`, the columns of `Λ^{1/2} Vᵀ` are coordinates `k_i` whose
//! Euclidean geometry reproduces the kernel geometry exactly,
//! `‖k_i − k_j‖² = K_ii + K_jj − 2 K_ij`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::correlation::{neuronal_correlation, ActivationMatrix};
use crate::error::{Error, Result};
use crate::linalg;

/// Eigenvalues above `-EIGEN_CLAMP_TOLERANCE` are clamped to zero; anything
/// lower means the input was not positive semidefinite.
pub const EIGEN_CLAMP_TOLERANCE: f64 = 1e-10;

/// Eigen-dimensions at or below this eigenvalue are treated as empty.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    /// `exp(−‖x − y‖₂² / 2σ²)`
    Gaussian,
    /// `exp(−‖x − y‖₁ / σ)`
    Laplacian,
}

impl KernelKind {
    pub fn evaluate(self, x: &[f64], y: &[f64], sigma: f64) -> f64 {
        match self {
            KernelKind::Gaussian => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
            KernelKind::Laplacian => {
                let d1: f64 = x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
                (-d1 / sigma).exp()
            }
        }
    }
}

impl std::str::FromStr for KernelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "rbf" => Ok(KernelKind::Gaussian),
            "laplacian" => Ok(KernelKind::Laplacian),
            other => Err(Error::InvalidParameter(format!("unknown kernel '{other}'"))),
        }
    }
}

/// Symmetric, unit-diagonal kernel matrix with entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
    pub kind: KernelKind,
    pub width: f64,
}

impl GramMatrix {
    /// Wraps an existing matrix after checking the Gram invariants.
    pub fn from_entries(entries: DMatrix<f64>, kind: KernelKind, width: f64) -> Result<Self> {
        let n = entries.nrows();
        if n != entries.ncols() || n == 0 {
            return Err(Error::InvalidParameter(format!(
                "Gram matrix must be square and nonempty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        for i in 0..n {
            if (entries[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "Gram diagonal entry {i} is {}, expected 1",
                    entries[(i, i)]
                )));
            }
            for j in 0..n {
                let v = entries[(i, j)];
                if !(0.0..=1.0).contains(&v) || (v - entries[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidInput(format!(
                        "Gram entry ({i},{j}) = {v} breaks symmetry or the [0,1] range"
                    )));
                }
            }
        }
        Ok(Self {
            entries,
            kind,
            width,
        })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    /// Squared kernel-space distance `K_ii + K_jj − 2K_ij`.
    pub fn kernel_distance_sq(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, i)] + self.entries[(j, j)] - 2.0 * self.entries[(i, j)]
    }
}

fn check_width(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "kernel width must be a positive finite number, got {sigma}"
        )));
    }
    Ok(())
}

/// Samples as contiguous rows, for pairwise loops.
fn sample_rows(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    x.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Kernel matrix over the samples (rows) of `x`.
pub fn gram_matrix(x: &ActivationMatrix, kind: KernelKind, sigma: f64) -> Result<GramMatrix> {
    check_width(sigma)?;
    let rows = sample_rows(x.values());
    let n = rows.len();
    let mut k = DMatrix::from_element(n, n, 1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = kind.evaluate(&rows[i], &rows[j], sigma);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(GramMatrix {
        entries: k,
        kind,
        width: sigma,
    })
}

/// Finite-dimensional feature coordinates derived from a Gram matrix.
///
/// Row `i` of [`coordinates`](Self::coordinates) is the feature vector
/// `k_i` of sample `i`; column `j` is eigen-dimension `j` across samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    coordinates: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    rank: usize,
    /// Sum of all eigenvalues of the decomposed matrix (its trace), so the
    /// share retained by a truncated map can be reported.
    total_mass: f64,
}

impl FeatureMatrix {
    fn from_eigenpairs(
        values: DVector<f64>,
        vectors: DMatrix<f64>,
        total_mass: f64,
    ) -> Result<Self> {
        if let Some(&bad) = values.iter().find(|&&v| v < -EIGEN_CLAMP_TOLERANCE) {
            return Err(Error::NotPositiveSemidefinite { eigenvalue: bad });
        }
        let clamped = values.map(|v| v.max(0.0));
        let n = vectors.nrows();
        let r = clamped.len();
        let mut coordinates = DMatrix::zeros(n, r);
        for j in 0..r {
            let s = clamped[j].sqrt();
            for i in 0..n {
                coordinates[(i, j)] = s * vectors[(i, j)];
            }
        }
        let rank = clamped.iter().filter(|&&v| v > RANK_TOLERANCE).count();
        Ok(Self {
            coordinates,
            eigenvalues: clamped,
            rank,
            total_mass,
        })
    }

    /// Samples × dimensions; row `i` is `k_i`.
    pub fn coordinates(&self) -> &DMatrix<f64> {
        &self.coordinates
    }

    /// Eigenvalues in descending order, clamped at zero.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Number of eigenvalues above [`RANK_TOLERANCE`] among the retained ones.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn samples(&self) -> usize {
        self.coordinates.nrows()
    }

    pub fn dimensions(&self) -> usize {
        self.coordinates.ncols()
    }

    /// Fraction of the decomposed matrix's trace carried by the retained dimensions.
    pub fn retained_mass(&self) -> f64 {
        if self.total_mass <= 0.0 {
            return 0.0;
        }
        self.eigenvalues.sum() / self.total_mass
    }

    /// Multiplies every coordinate by `c`; eigenvalues are left as decomposed.
    pub fn scale_coordinates(&mut self, c: f64) {
        self.coordinates *= c;
    }

    pub fn feature_vector(&self, i: usize) -> DVector<f64> {
        self.coordinates.row(i).transpose()
    }

    /// Squared Euclidean distance between `k_i` and `k_j`.
    pub fn distance_sq(&self, i: usize, j: usize) -> f64 {
        (self.coordinates.row(i) - self.coordinates.row(j)).norm_squared()
    }

    /// The nonempty dimensions viewed as a samples × dimensions activation
    /// matrix, or `None` when fewer than two samples exist.
    pub fn nonempty_dimensions(&self) -> Option<ActivationMatrix> {
        if self.rank == 0 {
            return None;
        }
        ActivationMatrix::new(self.coordinates.columns(0, self.rank).into_owned()).ok()
    }

    /// Average absolute Pearson correlation between nonempty feature
    /// dimensions across samples; 0 when fewer than two dimensions remain.
    pub fn dimensional_correlation(&self) -> f64 {
        match self.nonempty_dimensions() {
            Some(t) if t.neurons() >= 2 => neuronal_correlation(&t).map(|r| r.value).unwrap_or(0.0),
            _ => 0.0,
        }
    }
}

/// Full eigendecomposition feature map `Λ^{1/2} Vᵀ` of a Gram matrix.
pub fn feature_map_evd(k: &GramMatrix) -> Result<FeatureMatrix> {
    let (values, vectors) = linalg::symmetric_eigen_desc(k.entries());
    let trace = k.entries().trace();
    FeatureMatrix::from_eigenpairs(values, vectors, trace)
}

/// Feature map of the double-centred Gram matrix restricted to its
/// `max_dims` leading eigen-dimensions.
///
/// Centring subtracts the empirical kernel mean embedding from every
/// feature vector, so the retained coordinates are centred and mutually
/// uncorrelated across samples. Pairwise distances are unchanged by the
/// centring; truncation discards the trailing eigen-dimensions.
pub fn feature_map_centered(k: &GramMatrix, max_dims: usize) -> Result<FeatureMatrix> {
    let centred = linalg::double_center(k.entries());
    let trace = centred.trace();
    let (values, vectors) = linalg::leading_eigenpairs(&centred, max_dims.max(1));
    FeatureMatrix::from_eigenpairs(values, vectors, trace)
}

/// Gershgorin enclosure of the spectrum of a unit-diagonal Gram matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumBounds {
    pub lambda_min_bound: f64,
    pub lambda_max_bound: f64,
    /// The lower bound is not positive, so distance sandwiching is impossible.
    pub vacuous: bool,
}

/// `1 ∓ max_x Σ_{y≠x} K_xy`.
pub fn gershgorin_bounds(k: &GramMatrix) -> SpectrumBounds {
    let m = k.entries();
    let n = m.nrows();
    let radius = (0..n)
        .map(|x| (0..n).filter(|&y| y != x).map(|y| m[(x, y)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let lo = 1.0 - radius;
    SpectrumBounds {
        lambda_min_bound: lo,
        lambda_max_bound: 1.0 + radius,
        vacuous: lo <= 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DistanceInterval {
    /// Enclosure of `‖k_i − k_j‖²`.
    Bounded { lo: f64, hi: f64 },
    /// The Gershgorin lower bound is not positive; use the eigendecomposition.
    Unbounded,
}

impl DistanceInterval {
    pub fn contains(&self, v: f64, tol: f64) -> bool {
        match *self {
            DistanceInterval::Bounded { lo, hi } => v >= lo - tol && v <= hi + tol,
            DistanceInterval::Unbounded => true,
        }
    }
}

/// Bounds the feature distance `‖k_i − k_j‖²` from the Gram-column distance
/// `‖K_i − K_j‖²` alone, by inverting
/// `(λ²_min/λ_max)‖k_i−k_j‖² ≤ ‖K_i−K_j‖² ≤ (λ²_max/λ_min)‖k_i−k_j‖²`.
pub fn bounded_distance_interval(
    k: &GramMatrix,
    bounds: &SpectrumBounds,
    i: usize,
    j: usize,
) -> Result<DistanceInterval> {
    let n = k.size();
    if i >= n || j >= n {
        return Err(Error::InvalidParameter(format!(
            "sample index ({i}, {j}) out of range for {n} samples"
        )));
    }
    if bounds.vacuous || bounds.lambda_min_bound <= 0.0 {
        return Ok(DistanceInterval::Unbounded);
    }
    let (lmin, lmax) = (bounds.lambda_min_bound, bounds.lambda_max_bound);
    let column_gap = (k.entries().column(i) - k.entries().column(j)).norm_squared();
    Ok(DistanceInterval::Bounded {
        lo: column_gap * lmin / (lmax * lmax),
        hi: column_gap * lmax / (lmin * lmin),
    })
}

/// `tr(K_a K_bᵀ) / (‖K_a‖_F ‖K_b‖_F)`.
pub fn kernel_alignment(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            context: "kernel alignment",
            expected: format!("{:?}", a.shape()),
            found: format!("{:?}", b.shape()),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::InvalidParameter(
            "kernel alignment of a zero matrix is undefined".into(),
        ));
    }
    Ok(a.dot(b) / (na * nb))
}

/// Class-indicator kernel: 1 where labels agree, 0 otherwise.
pub fn label_kernel<L: PartialEq>(labels: &[L]) -> DMatrix<f64> {
    let n = labels.len();
    DMatrix::from_fn(n, n, |i, j| if labels[i] == labels[j] { 1.0 } else { 0.0 })
}

/// Median Euclidean distance over sample pairs.
///
/// Beyond 2000 samples an evenly strided subset of 2000 samples is used.
pub fn median_pairwise_distance(x: &ActivationMatrix) -> f64 {
    let rows = sample_rows(x.values());
    let stride = rows.len().div_ceil(2000).max(1);
    let picked: Vec<&Vec<f64>> = rows.iter().step_by(stride).collect();
    let mut d = Vec::with_capacity(picked.len() * picked.len().saturating_sub(1) / 2);
    for i in 0..picked.len() {
        for j in (i + 1)..picked.len() {
            let s: f64 = picked[i]
                .iter()
                .zip(picked[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d.push(s.sqrt());
        }
    }
    linalg::median(&d).unwrap_or(0.0)
}

/// Log-spaced grid of `points` widths over `[lo_factor, hi_factor] × d_med`.
pub fn log_width_grid(median_distance: f64, lo_factor: f64, hi_factor: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![median_distance * lo_factor];
    }
    let (a, b) = ((median_distance * lo_factor).ln(), (median_distance * hi_factor).ln());
    (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Default search grid: 20 log-spaced widths spanning `[0.1, 10] × d_med`.
pub fn default_width_grid(x: &ActivationMatrix) -> Result<Vec<f64>> {
    let d = median_pairwise_distance(x);
    if d <= 0.0 {
        return Err(Error::Degenerate(
            "median pairwise distance is zero; samples are (mostly) identical".into(),
        ));
    }
    Ok(log_width_grid(d, 0.1, 10.0, 20))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthCandidate {
    pub sigma: f64,
    pub alignment: f64,
    pub dim_correlation: f64,
    pub objective: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthSelection {
    pub sigma: f64,
    pub alignment: f64,
    pub dim_correlation: f64,
    pub objective: f64,
    pub beta: f64,
    pub grid: Vec<WidthCandidate>,
}

/// Picks the width maximising `A(K_σ, K_y) − β·ρ(k_σ)` over `grid`.
///
/// Each candidate needs a full eigendecomposition, so this is cubic in the
/// sample count. Ties go to the smallest width.
pub fn select_kernel_width<L: PartialEq>(
    x: &ActivationMatrix,
    labels: &[L],
    kind: KernelKind,
    beta: f64,
    grid: &[f64],
) -> Result<WidthSelection> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("kernel width grid is empty".into()));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidParameter(format!("beta must lie in [0, 1], got {beta}")));
    }
    if labels.len() != x.samples() {
        return Err(Error::DimensionMismatch {
            context: "kernel width selection labels",
            expected: x.samples().to_string(),
            found: labels.len().to_string(),
        });
    }
    let ky = label_kernel(labels);
    let mut candidates = Vec::with_capacity(grid.len());
    for &sigma in grid {
        let k = gram_matrix(x, kind, sigma)?;
        let alignment = kernel_alignment(k.entries(), &ky)?;
        let features = feature_map_evd(&k)?;
        let dim_correlation = features.dimensional_correlation();
        candidates.push(WidthCandidate {
            sigma,
            alignment,
            dim_correlation,
            objective: alignment - beta * dim_correlation,
            rank: features.rank(),
        });
    }
    let best = candidates
        .iter()
        .copied()
        .reduce(|best, c| {
            if c.objective > best.objective || (c.objective == best.objective && c.sigma < best.sigma) {
                c
            } else {
                best
            }
        })
        .expect("grid is nonempty");
    Ok(WidthSelection {
        sigma: best.sigma,
        alignment: best.alignment,
        dim_correlation: best.dim_correlation,
        objective: best.objective,
        beta,
        grid: candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn acts(rows: usize, cols: usize, data: &[f64]) -> ActivationMatrix {
        ActivationMatrix::new(DMatrix::from_row_slice(rows, cols, data)).unwrap()
    }

    fn gram(rows: usize, data: &[f64]) -> GramMatrix {
        GramMatrix::from_entries(DMatrix::from_row_slice(rows, rows, data), KernelKind::Gaussian, 1.0)
            .unwrap()
    }

    #[test]
    fn identical_samples_give_all_ones() {
        let k = gram_matrix(&acts(2, 3, &[0.5, 1.0, 2.0, 0.5, 1.0, 2.0]), KernelKind::Gaussian, 0.3)
            .unwrap();
        assert_eq!(k.entries(), &DMatrix::from_element(2, 2, 1.0));
    }

    #[test]
    fn gaussian_entry_at_two_sigma_squared() {
        let sigma = 0.7;
        // ‖x₁ − x₂‖² = 2σ²
        let d = (2.0f64).sqrt() * sigma;
        let k = gram_matrix(&acts(2, 1, &[0.0, d]), KernelKind::Gaussian, sigma).unwrap();
        assert!((k.entries()[(0, 1)] - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn laplacian_uses_l1_distance() {
        let k = gram_matrix(&acts(2, 2, &[0.0, 0.0, 1.0, -2.0]), KernelKind::Laplacian, 3.0).unwrap();
        assert!((k.entries()[(0, 1)] - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn gram_rejects_bad_width() {
        let x = acts(2, 1, &[0.0, 1.0]);
        assert!(matches!(
            gram_matrix(&x, KernelKind::Gaussian, 0.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(gram_matrix(&x, KernelKind::Gaussian, -1.0).is_err());
    }

    #[test]
    fn identity_gram_features_are_sqrt2_apart() {
        let n = 5;
        let k = GramMatrix::from_entries(DMatrix::identity(n, n), KernelKind::Gaussian, 1.0).unwrap();
        let f = feature_map_evd(&k).unwrap();
        for i in 0..n {
            for j in (i + 1)..n {
                assert!((f.distance_sq(i, j).sqrt() - 2f64.sqrt()).abs() < 1e-12);
            }
        }
        assert_eq!(f.rank(), n);
    }

    #[test]
    fn all_ones_gram_collapses_features() {
        let f = feature_map_evd(&gram(2, &[1.0, 1.0, 1.0, 1.0])).unwrap();
        assert!(f.distance_sq(0, 1) < 1e-15);
        assert_eq!(f.rank(), 1);
    }

    #[test]
    fn indefinite_matrix_is_reported() {
        // eigenvalues 1 ± 0.99 are fine; 3x3 with negative eigenvalue is not
        let entries = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0]);
        let k = GramMatrix::from_entries(entries, KernelKind::Gaussian, 1.0).unwrap();
        match feature_map_evd(&k) {
            Err(Error::NotPositiveSemidefinite { eigenvalue }) => {
                assert!((eigenvalue - (1.0 - 2f64.sqrt())).abs() < 1e-12)
            }
            other => panic!("expected PSD error, got {other:?}"),
        }
    }

    #[test]
    fn gershgorin_identity_and_2x2() {
        let eye = GramMatrix::from_entries(DMatrix::identity(4, 4), KernelKind::Gaussian, 1.0).unwrap();
        let b = gershgorin_bounds(&eye);
        assert_eq!((b.lambda_min_bound, b.lambda_max_bound, b.vacuous), (1.0, 1.0, false));
        let b = gershgorin_bounds(&gram(2, &[1.0, 0.5, 0.5, 1.0]));
        assert_eq!((b.lambda_min_bound, b.lambda_max_bound), (0.5, 1.5));
    }

    #[test]
    fn distance_interval_identity_is_exact() {
        let eye = GramMatrix::from_entries(DMatrix::identity(3, 3), KernelKind::Gaussian, 1.0).unwrap();
        let b = gershgorin_bounds(&eye);
        assert_eq!(
            bounded_distance_interval(&eye, &b, 0, 2).unwrap(),
            DistanceInterval::Bounded { lo: 2.0, hi: 2.0 }
        );
    }

    #[test]
    fn distance_interval_2x2_contains_evd_value() {
        let k = gram(2, &[1.0, 0.5, 0.5, 1.0]);
        let b = gershgorin_bounds(&k);
        let interval = bounded_distance_interval(&k, &b, 0, 1).unwrap();
        let evd = feature_map_evd(&k).unwrap().distance_sq(0, 1);
        assert!((evd - 1.0).abs() < 1e-12);
        assert!(interval.contains(evd, 0.0), "{interval:?} misses {evd}");
    }

    #[test]
    fn vacuous_bounds_give_unbounded_interval() {
        let k = gram(3, &[1.0, 0.9, 0.9, 0.9, 1.0, 0.9, 0.9, 0.9, 1.0]);
        let b = gershgorin_bounds(&k);
        assert!(b.vacuous);
        assert_eq!(
            bounded_distance_interval(&k, &b, 0, 1).unwrap(),
            DistanceInterval::Unbounded
        );
        assert!(bounded_distance_interval(&k, &b, 0, 3).is_err());
    }

    #[test]
    fn alignment_reference_values() {
        let eye = DMatrix::<f64>::identity(2, 2);
        let ones = DMatrix::from_element(2, 2, 1.0);
        assert!((kernel_alignment(&eye, &eye).unwrap() - 1.0).abs() < 1e-15);
        assert!((kernel_alignment(&eye, &ones).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(kernel_alignment(&eye, &DMatrix::zeros(2, 2)).is_err());
        assert!(kernel_alignment(&eye, &DMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn label_kernel_structure() {
        assert_eq!(
            label_kernel(&['a', 'a', 'b']),
            DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0])
        );
        assert_eq!(label_kernel(&[7, 7, 7]), DMatrix::from_element(3, 3, 1.0));
        assert_eq!(label_kernel(&[1, 2, 3]), DMatrix::identity(3, 3));
    }

    #[test]
    fn width_selection_edge_cases() {
        let x = acts(4, 1, &[0.0, 0.1, 3.0, 3.1]);
        let labels = [0, 0, 1, 1];
        let one = select_kernel_width(&x, &labels, KernelKind::Gaussian, 0.5, &[0.7]).unwrap();
        assert_eq!(one.sigma, 0.7);
        assert_eq!(one.grid.len(), 1);
        assert!(select_kernel_width(&x, &labels, KernelKind::Gaussian, 0.5, &[]).is_err());
        assert!(select_kernel_width(&x, &labels[..3], KernelKind::Gaussian, 0.5, &[1.0]).is_err());

        let grid = [0.05, 0.5, 5.0, 50.0];
        let sel = select_kernel_width(&x, &labels, KernelKind::Gaussian, 0.0, &grid).unwrap();
        let best_alignment = sel.grid.iter().map(|c| c.alignment).fold(f64::MIN, f64::max);
        assert_eq!(sel.alignment, best_alignment);
    }

    #[test]
    fn centered_map_is_uncorrelated_and_preserves_distances() {
        let x = acts(6, 2, &[0.0, 0.1, 1.0, 0.3, 0.2, 2.0, 1.5, 1.1, 0.7, 0.4, 2.2, 0.9]);
        let k = gram_matrix(&x, KernelKind::Gaussian, 1.0).unwrap();
        let f = feature_map_centered(&k, 6).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert!((f.distance_sq(i, j) - k.kernel_distance_sq(i, j)).abs() < 1e-12);
            }
        }
        assert!(f.dimensional_correlation() < 1e-8);
        assert!((f.retained_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn width_grid_is_log_spaced() {
        let g = log_width_grid(2.0, 0.1, 10.0, 20);
        assert_eq!(g.len(), 20);
        assert!((g[0] - 0.2).abs() < 1e-12 && (g[19] - 20.0).abs() < 1e-9);
        let r0 = g[1] / g[0];
        assert!(g.windows(2).all(|w| (w[1] / w[0] - r0).abs() < 1e-9));
    }
}
