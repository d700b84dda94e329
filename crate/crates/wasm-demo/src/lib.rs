//! WebAssembly bindings for the interactive demo page in `www/`.
//!
//! Each export takes plain numbers and returns a JSON string. The `*_json`
//! functions hold the logic so they can be tested natively.

use nalgebra::{DMatrix, DVector};
use neurocorr::correlation::ActivationMatrix;
use neurocorr::data::GaussianStream;
use neurocorr::entropy::{
    entropy_kernel_embedding, entropy_original, gaussian_entropy_analytic, Estimator, GaussianSpec,
    KernelEmbeddingConfig, WidthChoice,
};
use neurocorr::kernel::{bounded_distance_interval, gershgorin_bounds, gram_matrix, DistanceInterval, KernelKind};
use neurocorr::linalg::symmetric_eigen_desc;
use neurocorr::network::wc_vs_structure_sweep;
use neurocorr::Init;
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MAX_POINTS: usize = 200;
const MAX_SAMPLES: usize = 2000;

#[derive(Serialize)]
struct GramView {
    points: Vec<[f64; 2]>,
    gram: Vec<Vec<f64>>,
    eigenvalues: Vec<f64>,
    lower: f64,
    upper: f64,
    vacuous: bool,
    contained: bool,
    /// Feature-space distance of points 0 and 1 with its Gershgorin interval.
    pair_distance: Option<f64>,
    pair_interval: Option<[f64; 2]>,
}

fn kernel_kind(name: &str) -> Result<KernelKind, String> {
    match name {
        "gaussian" => Ok(KernelKind::Gaussian),
        "laplacian" => Ok(KernelKind::Laplacian),
        other => Err(format!("unknown kernel '{other}'")),
    }
}

/// Gram matrix of `n` planar points spread with standard deviation `spread`.
pub fn gram_explorer_json(n: usize, spread: f64, kernel: &str, sigma: f64, seed: u64) -> Result<String, String> {
    if !(2..=MAX_POINTS).contains(&n) {
        return Err(format!("point count must be in 2..={MAX_POINTS}"));
    }
    let kind = kernel_kind(kernel)?;
    let mut g = GaussianStream::new(seed);
    let x = DMatrix::from_fn(n, 2, |_, _| spread * g.next_normal());
    let k = gram_matrix(&ActivationMatrix::new(x.clone()).map_err(|e| e.to_string())?, kind, sigma)
        .map_err(|e| e.to_string())?;
    let b = gershgorin_bounds(&k);
    let (ev, _) = symmetric_eigen_desc(k.entries());
    let interval = bounded_distance_interval(&k, &b, 0, 1).map_err(|e| e.to_string())?;
    let view = GramView {
        points: x.row_iter().map(|r| [r[0], r[1]]).collect(),
        gram: k.entries().row_iter().map(|r| r.iter().copied().collect()).collect(),
        eigenvalues: ev.iter().copied().collect(),
        lower: b.lambda_min_bound,
        upper: b.lambda_max_bound,
        vacuous: b.vacuous,
        contained: ev.iter().all(|&l| l >= b.lambda_min_bound - 1e-12 && l <= b.lambda_max_bound + 1e-12),
        pair_distance: Some(k.kernel_distance_sq(0, 1).max(0.0).sqrt()),
        pair_interval: match interval {
            DistanceInterval::Bounded { lo, hi } => Some([lo.sqrt(), hi.sqrt()]),
            DistanceInterval::Unbounded => None,
        },
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct EntropyView {
    analytic: f64,
    original: f64,
    projected: f64,
    rank: usize,
}

/// Entropy of `d`-dimensional Gaussian samples whose coordinates share the
/// pairwise correlation `rho`.
pub fn entropy_compare_json(n: usize, d: usize, variance: f64, rho: f64, seed: u64) -> Result<String, String> {
    if !(10..=MAX_SAMPLES).contains(&n) {
        return Err(format!("sample count must be in 10..={MAX_SAMPLES}"));
    }
    if !(1..=8).contains(&d) {
        return Err("dimension must be in 1..=8".into());
    }
    let cov = DMatrix::from_fn(d, d, |i, j| if i == j { variance } else { rho * variance });
    let chol = cov
        .clone()
        .cholesky()
        .ok_or("covariance is not positive definite; lower the correlation")?;
    let spec = GaussianSpec::new(cov, DVector::zeros(d)).map_err(|e| e.to_string())?;
    let analytic = gaussian_entropy_analytic(&spec).map_err(|e| e.to_string())?;
    let mut g = GaussianStream::new(seed);
    let z = DMatrix::from_fn(n, d, |_, _| g.next_normal());
    let x = z * chol.l().transpose();
    let t = ActivationMatrix::new(x).map_err(|e| e.to_string())?;
    let est = Estimator::Knn { k: 3 };
    let original = entropy_original(&t, &est).map_err(|e| e.to_string())?;
    let cfg = KernelEmbeddingConfig {
        kind: KernelKind::Gaussian,
        width: WidthChoice::default(),
        max_dims: None,
        sample_cap: None,
    };
    let projected = entropy_kernel_embedding(&t, &cfg, &est).map_err(|e| e.to_string())?;
    let view = EntropyView {
        analytic,
        original: original.value,
        projected: projected.value,
        rank: projected.per_dimension.len(),
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

/// Mean |WC| of fresh `m → n` layers for every initialization scheme.
pub fn wc_sweep_json(m: usize, n_values: &[u32], seeds: u32) -> Result<String, String> {
    if m == 0 || seeds == 0 || seeds > 50 || n_values.is_empty() || n_values.iter().any(|&n| n > 1000) {
        return Err("need m ≥ 1, 1..=50 seeds and layer widths up to 1000".into());
    }
    let ns: Vec<usize> = n_values.iter().map(|&n| n as usize).collect();
    let seeds: Vec<u64> = (0..seeds as u64).collect();
    let rows = wc_vs_structure_sweep(&[m], &ns, &Init::ALL, &seeds).map_err(|e| e.to_string())?;
    serde_json::to_string(&rows).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn gram_explorer(n: usize, spread: f64, kernel: &str, sigma: f64, seed: u32) -> Result<String, JsValue> {
    gram_explorer_json(n, spread, kernel, sigma, seed as u64).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn entropy_compare(n: usize, d: usize, variance: f64, rho: f64, seed: u32) -> Result<String, JsValue> {
    entropy_compare_json(n, d, variance, rho, seed as u64).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn wc_sweep(m: usize, n_values: &[u32], seeds: u32) -> Result<String, JsValue> {
    wc_sweep_json(m, n_values, seeds).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn gram_spectrum_sits_inside_bounds() {
        let v: Value = serde_json::from_str(&gram_explorer_json(30, 3.0, "gaussian", 0.5, 1).unwrap()).unwrap();
        assert_eq!(v["gram"].as_array().unwrap().len(), 30);
        assert_eq!(v["contained"], Value::Bool(true));
    }

    #[test]
    fn wide_kernel_gives_vacuous_interval() {
        let v: Value = serde_json::from_str(&gram_explorer_json(30, 1.0, "laplacian", 50.0, 2).unwrap()).unwrap();
        assert_eq!(v["vacuous"], Value::Bool(true));
        assert!(v["pair_interval"].is_null());
    }

    #[test]
    fn correlated_samples_separate_the_estimates() {
        let v: Value = serde_json::from_str(&entropy_compare_json(1000, 4, 1.0, 0.9, 3).unwrap()).unwrap();
        let f = |k: &str| v[k].as_f64().unwrap();
        assert!(f("original") - f("analytic") > 0.5);
        assert!((f("projected") - f("analytic")).abs() < (f("original") - f("analytic")).abs());
    }

    #[test]
    fn sweep_covers_every_init() {
        let v: Value = serde_json::from_str(&wc_sweep_json(50, &[10, 50], 3).unwrap()).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 8);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(gram_explorer_json(1, 1.0, "gaussian", 1.0, 0).is_err());
        assert!(gram_explorer_json(10, 1.0, "cosine", 1.0, 0).is_err());
        assert!(entropy_compare_json(100, 3, 1.0, -0.9, 0).is_err());
        assert!(wc_sweep_json(10, &[], 3).is_err());
    }
}
