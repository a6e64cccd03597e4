#![allow(dead_code)]

use archfit::{ArchParams64, InnovationDist, Series64, SimSpec};

pub fn params(omega: f64, alpha: &[f64]) -> ArchParams64 {
    ArchParams64::new(omega, alpha.to_vec()).unwrap()
}

pub fn t5() -> InnovationDist {
    InnovationDist::student_t(5.0).unwrap()
}

pub fn sim(omega: f64, alpha: &[f64], dist: &InnovationDist, n: usize, seed: u64) -> Series64 {
    archfit::model::simulate(&SimSpec::new(params(omega, alpha), *dist, n, seed)).unwrap()
}

pub fn sim_stream(theta: &ArchParams64, dist: &InnovationDist, n: usize, seed: u64, stream: u64) -> Series64 {
    archfit::model::simulate(&SimSpec::new(theta.clone(), *dist, n, seed).with_stream(stream)).unwrap()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Standard error of the sample mean.
pub fn sem(v: &[f64]) -> f64 {
    let m = mean(v);
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    (var / v.len() as f64).sqrt()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Empirical covariance of `sqrt(n) (theta_hat - theta0)` (1/R normalizer).
pub fn scaled_covariance(thetas: &[Vec<f64>], theta0: &[f64], n: usize) -> Vec<Vec<f64>> {
    let k = theta0.len();
    let r = thetas.len() as f64;
    let means: Vec<f64> = (0..k).map(|j| thetas.iter().map(|t| t[j]).sum::<f64>() / r).collect();
    (0..k)
        .map(|i| {
            (0..k)
                .map(|j| thetas.iter().map(|t| (t[i] - means[i]) * (t[j] - means[j])).sum::<f64>() / r * n as f64)
                .collect()
        })
        .collect()
}
