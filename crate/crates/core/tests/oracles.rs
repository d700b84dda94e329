//! Measures checked against independently computed reference values.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use neurocorr::correlation::{preactivation_covariance, structure_correlation_coefficient, ConnectivityPattern};
use neurocorr::data::{standard_normals, GaussianStream};
use neurocorr::entropy::knn_entropy;
use neurocorr::network::{initialize, logits, loss_and_gradients, Activation, Init, NetworkSpec};
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use statrs::function::gamma::digamma;

/// Monte-Carlo covariance of `Wᵀx` for `x ~ N(0, Σ)`.
fn mc_covariance(wi: &[f64], wj: &[f64], l: &DMatrix<f64>, samples: usize, seed: u64) -> (f64, f64, f64) {
    let m = wi.len();
    let mut g = GaussianStream::new(seed);
    let (mut si, mut sj, mut sii, mut sjj, mut sij) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut z = DVector::zeros(m);
    for _ in 0..samples {
        z.iter_mut().for_each(|v| *v = g.next_normal());
        let x = l * &z;
        let ui: f64 = x.iter().zip(wi).map(|(a, b)| a * b).sum();
        let uj: f64 = x.iter().zip(wj).map(|(a, b)| a * b).sum();
        si += ui;
        sj += uj;
        sii += ui * ui;
        sjj += uj * uj;
        sij += ui * uj;
    }
    let s = samples as f64;
    let cov = (sij - si * sj / s) / (s - 1.0);
    let vi = (sii - si * si / s) / (s - 1.0);
    let vj = (sjj - sj * sj / s) / (s - 1.0);
    (cov, vi, vj)
}

#[test]
fn preactivation_covariance_matches_monte_carlo() {
    let mut rng = Pcg64::seed_from_u64(77);
    for inst in 0..5 {
        let m = 5;
        let l = DMatrix::from_fn(m, m, |i, j| if j <= i { rng.random_range(-1.0..1.0) } else { 0.0 });
        let sigma = &l * l.transpose();
        let wi: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let wj: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (cov, vi, vj) = mc_covariance(&wi, &wj, &l, 200_000, inst);
        let formula = preactivation_covariance(&wi, &wj, &sigma).unwrap();
        let scale = (vi * vj).sqrt();
        assert!((formula - cov).abs() < 0.02 * scale, "instance {inst}: {formula} vs {cov}");
        let var = preactivation_covariance(&wi, &wi, &sigma).unwrap();
        assert!((var / vi - 1.0).abs() < 0.02);
    }
}

fn brute_force_gamma(sets: &[Vec<usize>], gamma: f64) -> f64 {
    let hs: Vec<HashSet<usize>> = sets.iter().map(|s| s.iter().copied().collect()).collect();
    let mut total = 0.0;
    for a in &hs {
        let mut g = 0usize;
        let mut f = 0usize;
        for b in &hs {
            let shared = a.intersection(b).count();
            g += shared;
            if shared > 0 {
                f += 1;
            }
        }
        total += g as f64 / (gamma * f as f64);
    }
    total / hs.len() as f64
}

#[test]
fn gamma_matches_brute_force_on_random_sparse_patterns() {
    let mut rng = Pcg64::seed_from_u64(5);
    for _ in 0..50 {
        let m = rng.random_range(5..40);
        let n = rng.random_range(2..30);
        let sets: Vec<Vec<usize>> = (0..n)
            .map(|_| {
                let k = rng.random_range(1..=m.min(6));
                let mut s: Vec<usize> = (0..k).map(|_| rng.random_range(0..m)).collect();
                s.sort_unstable();
                s.dedup();
                s
            })
            .collect();
        let gamma = rng.random_range(0.5..3.0);
        let p = ConnectivityPattern::from_parent_sets(sets.clone(), m, gamma).unwrap();
        assert_eq!(structure_correlation_coefficient(&p).value, brute_force_gamma(&sets, gamma));
    }
}

#[test]
fn conv1d_gamma_matches_enumeration() {
    let p = ConnectivityPattern::conv1d(8, 3, 1, 1.0).unwrap();
    let sets: Vec<Vec<usize>> = (0..6).map(|o| vec![o, o + 1, o + 2]).collect();
    assert_eq!(structure_correlation_coefficient(&p).value, brute_force_gamma(&sets, 1.0));
}

fn reference_loss(spec_net: &neurocorr::NetworkSnapshot, x: &DMatrix<f64>, y: &[u32]) -> f64 {
    let z = logits(spec_net, x).unwrap();
    let mut total = 0.0;
    for i in 0..z.nrows() {
        let row: Vec<f64> = z.row(i).iter().copied().collect();
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - row[y[i] as usize];
    }
    total / z.nrows() as f64
}

#[test]
fn gradients_match_central_differences() {
    for act in [Activation::Identity, Activation::Tanh, Activation::Relu] {
        let spec = NetworkSpec::new(vec![3, 4, 3], act, Init::Xavier, 17).unwrap();
        let mut net = initialize(&spec);
        net.biases[0] = DVector::from_vec(vec![0.1, -0.2, 0.05, 0.3]);
        let z = standard_normals(6 * 3, 4);
        let x = DMatrix::from_row_slice(6, 3, &z);
        let y = [0, 1, 2, 1, 0, 2];
        let (_, grads) = loss_and_gradients(&net, &x, &y).unwrap();
        let h = 1e-6;
        for l in 0..net.layers() {
            let (rows, cols) = net.weights[l].values().shape();
            for i in 0..rows {
                for j in 0..cols {
                    let mut plus = net.clone();
                    let mut minus = net.clone();
                    let mut wp = plus.weights[l].values().clone();
                    wp[(i, j)] += h;
                    plus.weights[l] = neurocorr::WeightMatrix::new(wp).unwrap();
                    let mut wm = minus.weights[l].values().clone();
                    wm[(i, j)] -= h;
                    minus.weights[l] = neurocorr::WeightMatrix::new(wm).unwrap();
                    let fd = (reference_loss(&plus, &x, &y) - reference_loss(&minus, &x, &y)) / (2.0 * h);
                    let an = grads[l].weights[(i, j)];
                    let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8);
                    assert!(rel < 1e-5 || (fd - an).abs() < 1e-9, "{act} layer {l} ({i},{j}): fd {fd} vs {an}");
                }
            }
            for i in 0..net.biases[l].len() {
                let mut plus = net.clone();
                let mut minus = net.clone();
                plus.biases[l][i] += h;
                minus.biases[l][i] -= h;
                let fd = (reference_loss(&plus, &x, &y) - reference_loss(&minus, &x, &y)) / (2.0 * h);
                let an = grads[l].bias[i];
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8);
                assert!(rel < 1e-5 || (fd - an).abs() < 1e-9, "{act} bias {l}/{i}: fd {fd} vs {an}");
            }
        }
    }
}

/// Kozachenko–Leonenko in 2-D by sorting every distance; the unit disc has area π.
fn knn_reference_2d(points: &[(f64, f64)], k: usize) -> f64 {
    let n = points.len();
    let mut sum_log = 0.0;
    for (i, p) in points.iter().enumerate() {
        let mut d: Vec<f64> = points
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, q)| ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt())
            .collect();
        d.sort_by(f64::total_cmp);
        sum_log += d[k - 1].ln();
    }
    digamma(n as f64) - digamma(k as f64) + std::f64::consts::PI.ln() + 2.0 * sum_log / n as f64
}

#[test]
fn multivariate_knn_matches_reference() {
    let z = standard_normals(800, 12);
    let pts: Vec<(f64, f64)> = z.chunks(2).map(|c| (c[0], 3.0 * c[1])).collect();
    let x = DMatrix::from_fn(pts.len(), 2, |i, j| if j == 0 { pts[i].0 } else { pts[i].1 });
    for k in [1, 3, 5] {
        let a = knn_entropy(&x, k).unwrap();
        let b = knn_reference_2d(&pts, k);
        assert!((a - b).abs() < 1e-10, "k = {k}: {a} vs {b}");
    }
}

#[test]
fn box_muller_stream_matches_closed_form() {
    let mut rng = Pcg64::seed_from_u64(99);
    let a: f64 = rng.random();
    let b: f64 = rng.random();
    let r = (-2.0 * (1.0 - a).ln()).sqrt();
    let expected = [r * (2.0 * std::f64::consts::PI * b).cos(), r * (2.0 * std::f64::consts::PI * b).sin()];
    assert_eq!(standard_normals(2, 99), expected.to_vec());
}
