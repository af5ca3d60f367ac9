//! Panels and brute-force estimators shared by the integration tests.

#![allow(dead_code)]

use nalgebra::DMatrix;
use newsbias::stats::PanelObservation;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Firm and time effects, a time-varying slope on `x_orig`, and uniform
/// noise; `drop` is the chance a firm-period is missing.
pub fn panel(n_firms: usize, n_times: usize, drop: f64, seed: u64) -> Vec<PanelObservation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<f64> = (0..n_firms).map(|_| rng.random_range(-40.0..40.0)).collect();
    let b: Vec<f64> = (0..n_times).map(|_| rng.random_range(-40.0..40.0)).collect();
    let shock: Vec<f64> = (0..n_times).map(|_| rng.random_range(-20.0..20.0)).collect();
    let mut out = Vec::new();
    for (i, ai) in a.iter().enumerate() {
        for (t, bt) in b.iter().enumerate() {
            if rng.random_bool(drop) {
                continue;
            }
            let x1 = [-1.0, 0.0, 1.0][rng.random_range(0..3)];
            let x2 = if rng.random_bool(0.7) {
                x1
            } else {
                [-1.0, 0.0, 1.0][rng.random_range(0..3)]
            };
            out.push(PanelObservation {
                firm: format!("F{i}"),
                period: format!("P{t:04}"),
                return_bp: ai + bt + 8.0 * x1 + 3.0 * x2 + shock[t] * x1 + rng.random_range(-60.0..60.0),
                x_orig: x1,
                x_rep: x2,
            });
        }
    }
    out
}

/// `B (sum_ij [c_i = c_j] x_i e_i e_j x_j') B` times the small-sample factor.
pub fn brute_sandwich(x: &DMatrix<f64>, e: &[f64], c: &[usize]) -> DMatrix<f64> {
    let (n, k) = x.shape();
    let bread = (x.transpose() * x).try_inverse().unwrap();
    let mut meat = DMatrix::zeros(k, k);
    for i in 0..n {
        for j in 0..n {
            if c[i] == c[j] {
                for a in 0..k {
                    for b in 0..k {
                        meat[(a, b)] += x[(i, a)] * e[i] * e[j] * x[(j, b)];
                    }
                }
            }
        }
    }
    let mut distinct = c.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let g = distinct.len() as f64;
    let factor = g / (g - 1.0) * (n as f64 - 1.0) / (n as f64 - k as f64);
    &bread * meat * &bread * factor
}
