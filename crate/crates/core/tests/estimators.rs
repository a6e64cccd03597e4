mod common;

use archfit::diagnostics::{moment_matrices, CovarianceKind};
use archfit::estimators::{
    ef_functional, ef_score, ef_score_frozen, fit_ef, fit_ef_from, fit_ls, fit_ml, fit_qml, gaussian_negloglik,
    gaussian_score, ls_functional, ml_negloglik, Design,
};
use archfit::{ArchError, ArchParams64, Estimate64, EstimatorKind, InnovationDist, OptimOptions, Series64};
use common::{max_rel_err, median, params, scaled_covariance, sim, sim_stream, t5};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Two-parameter weighted least squares by Cramer's rule.
fn cramer_wls(rows: &[[f64; 2]], resp: &[f64], w: &[f64]) -> [f64; 2] {
    let (mut a, mut b, mut c, mut d, mut e) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((r, y), wi) in rows.iter().zip(resp).zip(w) {
        a += wi * r[0] * r[0];
        b += wi * r[0] * r[1];
        c += wi * r[1] * r[1];
        d += wi * r[0] * y;
        e += wi * r[1] * y;
    }
    let det = a * c - b * b;
    [(d * c - b * e) / det, (a * e - b * d) / det]
}

#[test]
fn four_point_normal_equations() {
    let s = Series64::new(vec![1.0, 2.0, 1.0, 2.0]).unwrap();
    let design = Design::from_series(&s, 1);
    let rows = [[1.0, 1.0], [1.0, 4.0], [1.0, 1.0]];
    let resp = [4.0, 1.0, 4.0];
    let oracle = cramer_wls(&rows, &resp, &[1.0; 3]);
    let got = ls_functional(&design).unwrap();
    assert!(max_rel_err(&got, &oracle) < 1e-14);
    assert!((got[0] - 5.0).abs() < 1e-13 && (got[1] + 1.0).abs() < 1e-13);

    // Second step at the unprojected pilot.
    let w: Vec<f64> = rows.iter().map(|r| 1.0 / (got[0] * r[0] + got[1] * r[1]).powi(2)).collect();
    let oracle = cramer_wls(&rows, &resp, &w);
    let ef = ef_functional(&design, &got, 1e-8).unwrap();
    assert!(max_rel_err(&ef, &oracle) < 1e-13);

    // Four observations are below the minimum sample size for fitting.
    assert!(matches!(fit_ls(&s, 1), Err(ArchError::Domain(_))));
}

#[test]
fn weighted_least_squares_matches_hand_oracle() {
    let s = sim(1.0, &[0.4], &InnovationDist::Normal, 40, 3);
    let design = Design::from_series(&s, 1);
    let pilot = [0.8, 0.5];
    let x2 = s.x2();
    let rows: Vec<[f64; 2]> = (1..x2.len()).map(|t| [1.0, x2[t - 1]]).collect();
    let resp = &x2[1..];
    let w: Vec<f64> = rows.iter().map(|r| 1.0 / (pilot[0] + pilot[1] * r[1]).powi(2)).collect();
    let oracle = cramer_wls(&rows, resp, &w);
    assert!(max_rel_err(&ef_functional(&design, &pilot, 1e-8).unwrap(), &oracle) < 1e-12);
}

#[test]
fn exact_affine_data() {
    let mut x2: Vec<f64> = vec![0.7];
    for _ in 0..30 {
        x2.push(1.0 + 0.5 * x2.last().unwrap());
    }
    let s = Series64::new(x2.iter().map(|v| v.sqrt()).collect()).unwrap();
    for fit in [fit_ls(&s, 1).unwrap(), fit_ef(&s, 1).unwrap()] {
        assert!((fit.theta[0] - 1.0).abs() < 1e-9 && (fit.theta[1] - 0.5).abs() < 1e-9, "{:?}", fit.theta);
    }
}

#[test]
fn estimates_respect_constraints() {
    for seed in 0..20 {
        let s = sim(1.0, &[0.02, 0.0], &InnovationDist::Normal, 60, seed);
        for fit in [fit_ls(&s, 2).unwrap(), fit_ef(&s, 2).unwrap(), fit_qml(&s, 2, &OptimOptions::default()).unwrap()] {
            assert!(fit.theta[0] > 0.0 && fit.theta[1..].iter().all(|&a| a >= 0.0), "{:?}", fit.theta);
        }
    }
}

#[test]
fn ef_equals_ls_under_constant_weights() {
    for seed in 0..10 {
        let s = sim(1.0, &[0.3], &t5(), 300, seed);
        let ls = fit_ls(&s, 1).unwrap();
        let ef = fit_ef_from(&s, &params(2.5, &[0.0])).unwrap();
        assert_eq!(ls.theta, ef.theta);
        assert_eq!(ef.first_step, Some(vec![2.5, 0.0]));
    }
}

#[test]
fn ef_records_its_ls_pilot() {
    let s = sim(1.0, &[0.3], &InnovationDist::Normal, 300, 1);
    let ls = fit_ls(&s, 1).unwrap();
    let ef = fit_ef(&s, 1).unwrap();
    assert_eq!(ef.first_step.as_deref(), Some(&ls.theta[..]));
    assert_eq!(ef.kind, EstimatorKind::Ef);
}

#[test]
fn constant_series_is_singular() {
    let s = Series64::new(vec![1.0; 50]).unwrap();
    assert!(matches!(fit_ls(&s, 1), Err(ArchError::Singular(_))));
    assert!(matches!(fit_ef(&s, 1), Err(ArchError::Singular(_))));
}

#[test]
fn frozen_score_vanishes_at_weighted_solution() {
    let s = sim(1.0, &[0.3], &InnovationDist::Normal, 500, 8);
    let pilot = fit_ls(&s, 1).unwrap().params();
    let ef = fit_ef(&s, 1).unwrap();
    let raw = ef_functional(&Design::from_series(&s, 1), &pilot.theta(), 1e-8).unwrap();
    assert_eq!(raw, ef.theta, "projection inactive on this sample");
    let score = ef_score_frozen(&ef.params(), &pilot, &s, 2.0).unwrap();
    let scale: f64 = s.x2().iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(score.iter().all(|g| g.abs() < 1e-10 * scale), "{score:?}");
}

#[test]
fn scores_are_centred_at_the_truth() {
    let n = 100_000;
    let theta0 = params(1.0, &[0.3]);
    let s = sim(1.0, &[0.3], &InnovationDist::Normal, n, 21);
    let bound = 4.0 / (n as f64).sqrt();
    let nn = (n - 1) as f64;
    for g in [ef_score(&theta0, &s, 2.0).unwrap(), gaussian_negloglik(&theta0, &s).unwrap().1] {
        assert!(g.iter().all(|v| (v / nn).abs() < bound), "{g:?}");
    }
}

#[test]
fn gaussian_score_sign_and_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let s = sim(1.0, &[0.2, 0.1], &InnovationDist::Normal, 400, 5);
    for _ in 0..10 {
        let th = params(rng.random_range(0.3..2.0), &[rng.random_range(0.0..0.6), rng.random_range(0.0..0.6)]);
        let gs = gaussian_score(&th, &s).unwrap();
        let ef = ef_score(&th, &s, 2.0).unwrap();
        let grad = gaussian_negloglik(&th, &s).unwrap().1;
        assert!(max_rel_err(&gs, &ef) < 1e-12);
        assert!(max_rel_err(&gs, &grad) < 1e-12);
    }
}

#[test]
fn white_noise_likelihood_closed_form() {
    let s = sim(1.0, &[0.0], &InnovationDist::Normal, 1000, 6);
    let m = s.x2()[1..].iter().sum::<f64>() / 999.0;
    let (f, _) = gaussian_negloglik(&params(1.3, &[0.0]), &s).unwrap();
    assert!((f - 999.0 / 2.0 * (1.3f64.ln() + m / 1.3)).abs() < 1e-9 * f.abs());
    let fit = fit_qml(&s, 1, &OptimOptions::default()).unwrap();
    if fit.alpha()[0] < 1e-12 {
        assert!((fit.omega() - m).abs() < 1e-6);
    }
}

/// Central differences with step `1e-6` relative to each coordinate.
fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|j| {
            let h = 1e-6 * x[j].abs().max(1e-3);
            let mut up = x.to_vec();
            let mut dn = x.to_vec();
            up[j] += h;
            dn[j] -= h;
            (f(&up) - f(&dn)) / (2.0 * h)
        })
        .collect()
}

fn gradient_check(obj: impl Fn(&ArchParams64) -> (f64, Vec<f64>), points: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..points {
        let theta = vec![rng.random_range(0.2..3.0), rng.random_range(0.01..0.8), rng.random_range(0.01..0.5)];
        let analytic = obj(&ArchParams64::from_theta(&theta).unwrap()).1;
        let numeric = fd_gradient(|t| obj(&ArchParams64::from_theta(t).unwrap()).0, &theta);
        worst = worst.max(max_rel_err(&analytic, &numeric));
    }
    worst
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let s = sim(1.0, &[0.3, 0.1], &InnovationDist::Normal, 300, 30);
    let q = gradient_check(|th| gaussian_negloglik(th, &s).unwrap(), 50, 1);
    assert!(q <= 1e-5, "QML gradient error {q:e}");
    let st = sim(1.0, &[0.3, 0.1], &t5(), 300, 31);
    let m = gradient_check(|th| ml_negloglik(th, &st, &t5()).unwrap(), 50, 2);
    assert!(m <= 1e-5, "t5 ML gradient error {m:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn closed_forms_are_scale_equivariant(seed in 0u64..1000, k in -3i32..4, c in 0.1f64..10.0) {
        let s = sim(1.0, &[0.25], &InnovationDist::Normal, 200, seed);
        let base_ls = fit_ls(&s, 1).unwrap();
        let base_ef = fit_ef(&s, 1).unwrap();

        // Powers of two commute with every rounding step.
        let two = 2f64.powi(k);
        let scaled = s.scaled(two);
        let ls = fit_ls(&scaled, 1).unwrap();
        let ef = fit_ef(&scaled, 1).unwrap();
        prop_assert_eq!(ls.theta.clone(), vec![base_ls.theta[0] * two * two, base_ls.theta[1]]);
        prop_assert_eq!(ef.theta.clone(), vec![base_ef.theta[0] * two * two, base_ef.theta[1]]);

        let scaled = s.scaled(c);
        for (fit, base) in [(fit_ls(&scaled, 1).unwrap(), &base_ls), (fit_ef(&scaled, 1).unwrap(), &base_ef)] {
            prop_assert!((fit.theta[0] / (c * c) - base.theta[0]).abs() < 1e-9 * base.theta[0]);
            prop_assert!((fit.theta[1] - base.theta[1]).abs() < 1e-9 * base.theta[1].max(1e-3));
        }
    }
}

#[test]
fn likelihood_fits_are_scale_equivariant() {
    let opts = OptimOptions::default();
    for seed in 0..5 {
        let s = sim(1.0, &[0.3], &t5(), 500, seed);
        let c = 3.7;
        let scaled = s.scaled(c);
        let pairs = [
            (fit_qml(&s, 1, &opts).unwrap(), fit_qml(&scaled, 1, &opts).unwrap()),
            (fit_ml(&s, 1, &t5(), &opts).unwrap(), fit_ml(&scaled, 1, &t5(), &opts).unwrap()),
        ];
        for (a, b) in pairs {
            assert!(a.converged && b.converged);
            assert!((b.theta[0] / (c * c) - a.theta[0]).abs() < 1e-5 * a.theta[0]);
            assert!((b.theta[1] - a.theta[1]).abs() < 1e-5);
        }
    }
}

#[test]
fn ml_requires_a_density() {
    let s = sim(1.0, &[0.3], &InnovationDist::Normal, 200, 1);
    assert!(matches!(fit_ml(&s, 1, &InnovationDist::Logistic, &OptimOptions::default()), Err(ArchError::Domain(_))));
}

#[test]
fn gaussian_ml_coincides_with_qml() {
    let opts = OptimOptions::default();
    for seed in 0..5 {
        let s = sim(1.0, &[0.2], &InnovationDist::Normal, 400, seed);
        let q = fit_qml(&s, 1, &opts).unwrap();
        let m = fit_ml(&s, 1, &InnovationDist::Normal, &opts).unwrap();
        assert_eq!(q.theta, m.theta);
        assert_eq!(q.iterations, m.iterations);
    }
}

fn fit_kind(kind: EstimatorKind, s: &Series64, dist: &InnovationDist) -> Estimate64 {
    let opts = OptimOptions::default();
    match kind {
        EstimatorKind::Ls => fit_ls(s, 1),
        EstimatorKind::Ef => fit_ef(s, 1),
        EstimatorKind::Qml => fit_qml(s, 1, &opts),
        EstimatorKind::Ml => fit_ml(s, 1, dist, &opts),
    }
    .unwrap()
}

#[test]
fn estimators_are_consistent() {
    let theta0 = params(1.0, &[0.2]);
    for dist in [InnovationDist::Normal, t5()] {
        for kind in EstimatorKind::ALL {
            let errors = |n: usize| -> f64 {
                let e: Vec<f64> = (0..200u64)
                    .into_par_iter()
                    .map(|r| {
                        let fit = fit_kind(kind, &sim_stream(&theta0, &dist, n, 77, r), &dist);
                        fit.theta.iter().zip(theta0.theta()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
                    })
                    .collect();
                median(e)
            };
            let (small, mid, large) = (errors(250), errors(1000), errors(4000));
            assert!(small > mid && mid > large, "{dist} {kind}: {small} {mid} {large}");
            assert!(small >= 2.0 * large, "{dist} {kind}: {small} -> {large}");
        }
    }
}

#[test]
fn gaussian_ml_covariance_matches_inverse_information() {
    let theta0 = params(1.0, &[0.1]);
    let big = sim(1.0, &[0.1], &InnovationDist::Normal, 1_000_000, 99);
    let mats = moment_matrices(&big, &theta0).unwrap();
    let expected = archfit::diagnostics::asymptotic_covariance(CovarianceKind::MlNormal, &mats, 2.0).unwrap();
    let n = 2000;
    let thetas: Vec<Vec<f64>> = (0..2000u64)
        .into_par_iter()
        .map(|r| {
            fit_kind(EstimatorKind::Ml, &sim_stream(&theta0, &InnovationDist::Normal, n, 5, r), &InnovationDist::Normal)
                .theta
        })
        .collect();
    let emp = scaled_covariance(&thetas, &theta0.theta(), n);
    for i in 0..2 {
        for j in 0..2 {
            let rel = (emp[i][j] - expected[(i, j)]).abs() / expected[(i, j)].abs();
            assert!(rel < 0.15, "entry ({i},{j}): empirical {} vs {}", emp[i][j], expected[(i, j)]);
        }
    }
}

#[test]
fn reported_standard_errors_are_consistent_with_acov() {
    let s = sim(1.0, &[0.3], &InnovationDist::Normal, 800, 17);
    for fit in [fit_ls(&s, 1).unwrap(), fit_ef(&s, 1).unwrap(), fit_qml(&s, 1, &OptimOptions::default()).unwrap()] {
        let acov = fit.acov.clone().unwrap();
        let se = fit.std_errors.clone().unwrap();
        assert!(acov.asymmetry() == 0.0);
        for j in 0..2 {
            assert!((se[j] - acov[(j, j)].sqrt()).abs() < 1e-15);
        }
        assert_eq!(fit.n_used, 799);
    }
}

#[test]
fn estimate_json_fields() {
    let s = sim(1.0, &[0.3], &InnovationDist::Normal, 300, 2);
    let v: serde_json::Value = serde_json::to_value(fit_ef(&s, 1).unwrap()).unwrap();
    for key in ["kind", "theta", "acov", "var_eps2_hat", "converged", "iterations"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["kind"], "EF");
    assert_eq!(v["acov"].as_array().unwrap().len(), 2);
}
