//! Small dense linear-algebra helpers shared by the kernel, entropy, and
//! network modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted in
/// descending order; column `i` of the returned matrix pairs with value `i`.
pub fn symmetric_eigen_desc(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(m.nrows(), n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Leading `r` eigenpairs of a symmetric positive semidefinite matrix.
///
/// Uses block subspace iteration with a Rayleigh-Ritz step, which only needs
/// matrix-block products; that keeps 5000-sample Gram matrices tractable when
/// just a few leading directions are wanted. Falls back to a full
/// decomposition for small matrices or when the iteration stalls.
pub fn leading_eigenpairs(m: &DMatrix<f64>, r: usize) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let r = r.min(n);
    let block = (r + 10).min(n);
    if n <= 400 || 2 * block >= n {
        let (values, vectors) = symmetric_eigen_desc(m);
        return (values.rows(0, r).into_owned(), vectors.columns(0, r).into_owned());
    }

    let mut rng = Pcg64::seed_from_u64(0x5eed_e16e);
    let mut q = DMatrix::from_fn(n, block, |_, _| rng.random_range(-1.0..1.0));
    q = q.qr().q();
    let scale = m.diagonal().iter().map(|v| v.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut prev: Option<DVector<f64>> = None;

    for iter in 0..2000 {
        let z = m * &q;
        // Rayleigh-Ritz on the current block.
        let h = q.transpose() * &z;
        let h = (&h + h.transpose()) * 0.5;
        let (theta, s) = symmetric_eigen_desc(&h);
        let ritz_vectors = &q * &s;
        let leading = theta.rows(0, r).into_owned();

        let converged = match &prev {
            Some(p) => (0..r).all(|i| (leading[i] - p[i]).abs() <= 1e-13 * scale),
            None => false,
        };
        if converged && iter > 3 {
            let mz = m * ritz_vectors.columns(0, r);
            let mut worst: f64 = 0.0;
            for i in 0..r {
                let resid = mz.column(i) - ritz_vectors.column(i) * theta[i];
                worst = worst.max(resid.norm());
            }
            if worst <= 1e-9 * scale.sqrt().max(1.0) {
                return (leading, ritz_vectors.columns(0, r).into_owned());
            }
        }
        prev = Some(leading);
        q = (&z * &s).qr().q();
    }

    let (values, vectors) = symmetric_eigen_desc(m);
    (values.rows(0, r).into_owned(), vectors.columns(0, r).into_owned())
}

/// Double-centres a symmetric matrix: `H K H` with `H = I - 11ᵀ/n`.
pub fn double_center(k: &DMatrix<f64>) -> DMatrix<f64> {
    let n = k.nrows();
    let nf = n as f64;
    let row_means: Vec<f64> = (0..n).map(|i| k.row(i).sum() / nf).collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    DMatrix::from_fn(n, n, |i, j| k[(i, j)] - row_means[i] - row_means[j] + grand)
}

/// Column means of a samples-by-variables matrix.
pub fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    let s = x.nrows() as f64;
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / s))
}

/// Unbiased (s − 1) covariance of the columns of a samples-by-variables matrix.
pub fn covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let s = x.nrows();
    let means = column_means(x);
    let mut centred = x.clone();
    for (j, mut col) in centred.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    let denom = (s.max(2) - 1) as f64;
    let mut cov = centred.transpose() * &centred / denom;
    symmetrize(&mut cov);
    cov
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Natural log of the determinant of a symmetric positive-definite matrix,
/// or `None` when the Cholesky factorisation fails.
pub fn log_det_spd(m: &DMatrix<f64>) -> Option<f64> {
    let chol = m.clone().cholesky()?;
    let l = chol.l();
    Some(2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// Median of a slice (mean of the two middle values for even lengths).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 0 {
        0.5 * (v[mid - 1] + v[mid])
    } else {
        v[mid]
    })
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(v[lo] + (v[hi] - v[lo]) * frac)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_psd(n: usize, rank: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = Pcg64::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, rank, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose()
    }

    #[test]
    fn eigen_desc_is_sorted_and_reconstructs() {
        let m = random_psd(30, 30, 1);
        let (vals, vecs) = symmetric_eigen_desc(&m);
        for w in vals.as_slice().windows(2) {
            assert!(w[0] >= w[1]);
        }
        let rebuilt = &vecs * DMatrix::from_diagonal(&vals) * vecs.transpose();
        assert!((rebuilt - m).abs().max() < 1e-10);
    }

    #[test]
    fn subspace_iteration_matches_full_decomposition() {
        let m = random_psd(600, 40, 7);
        let (full_vals, full_vecs) = symmetric_eigen_desc(&m);
        let (vals, vecs) = leading_eigenpairs(&m, 8);
        for i in 0..8 {
            assert!((vals[i] - full_vals[i]).abs() < 1e-8 * full_vals[0]);
            let dot = vecs.column(i).dot(&full_vecs.column(i)).abs();
            assert!((dot - 1.0).abs() < 1e-8, "eigvec {i}: |dot| = {dot}");
        }
    }

    #[test]
    fn double_centering_zeroes_row_sums() {
        let m = random_psd(12, 12, 3);
        let c = double_center(&m);
        for i in 0..12 {
            assert!(c.row(i).sum().abs() < 1e-10);
        }
    }

    #[test]
    fn covariance_uses_unbiased_normalisation() {
        let x = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        assert!((covariance(&x)[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn quantiles() {
        let v = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(median(&v), Some(2.5));
        assert_eq!(quantile(&v, 0.0), Some(1.0));
        assert_eq!(quantile(&v, 1.0), Some(4.0));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn log_det_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]));
        assert!((log_det_spd(&m).unwrap() - 6.0f64.ln()).abs() < 1e-14);
        assert!(log_det_spd(&DMatrix::zeros(2, 2)).is_none());
    }
}
