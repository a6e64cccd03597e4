use super::likelihood::Likelihood;
use super::optim::bfgs;
use super::{
    check_inputs, estimate_acov, fit_ls, omega_floor, student_scale_information, var_eps2_hat, Design, Estimate,
    EstimatorKind, OptimOptions,
};
use crate::diagnostics::CovarianceKind;
use crate::error::Result;
use crate::model::{ArchParams, InnovationDist, Series};
use crate::scalar::Scalar;

/// Lower clamp for `log alpha_j`; `exp(-40)` is indistinguishable from zero.
const LOG_ALPHA_MIN: f64 = -40.0;

/// LS slopes below this are lifted before starting the optimizer. In log
/// coordinates the gradient scales with `alpha`, so a start at the clamp
/// could never move back into the interior.
const ALPHA_START_MIN: f64 = 0.01;

/// Same for `omega`, as a fraction of the sample mean of `X_t^2`. A projected
/// LS intercept sits at the floor, where the log-coordinate gradient vanishes.
const OMEGA_START_FRAC: f64 = 0.05;

/// Gaussian quasi-maximum likelihood, started from the projected LS fit.
pub fn fit_qml<T: Scalar>(series: &Series<T>, p: usize, opts: &OptimOptions) -> Result<Estimate<T>> {
    fit_likelihood(series, p, Likelihood::Gaussian, EstimatorKind::Qml, opts)
}

/// Maximum likelihood under a known innovation law (normal or Student t).
/// Under the normal law this is the same optimization as [`fit_qml`].
pub fn fit_ml<T: Scalar>(
    series: &Series<T>,
    p: usize,
    dist: &InnovationDist,
    opts: &OptimOptions,
) -> Result<Estimate<T>> {
    let lik = Likelihood::for_dist(dist)?;
    let mut est = fit_likelihood(series, p, lik, EstimatorKind::Ml, opts)?;
    if let InnovationDist::StudentT { .. } = dist {
        // ML covariance (4 / J) Gamma^{-1} has the EF form with 4 / J in place of Var(eps^2).
        let k = T::lit(4.0 / student_scale_information(dist)?);
        let acov = estimate_acov(CovarianceKind::Ef, &est.params(), series, k);
        est.std_errors = acov.as_ref().map(|(_, se)| se.clone());
        est.acov = acov.map(|(c, _)| c);
    }
    Ok(est)
}

fn fit_likelihood<T: Scalar>(
    series: &Series<T>,
    p: usize,
    lik: Likelihood,
    kind: EstimatorKind,
    opts: &OptimOptions,
) -> Result<Estimate<T>> {
    check_inputs(series, p)?;
    let ls = fit_ls(series, p)?;
    let floor = omega_floor(series);
    let design = Design::from_series(series, p);

    let lower: Vec<T> = std::iter::once(floor.ln()).chain(std::iter::repeat_n(T::lit(LOG_ALPHA_MIN), p)).collect();
    let to_theta = |u: &[T]| -> Vec<T> { u.iter().zip(&lower).map(|(&v, &lo)| v.max(lo).exp()).collect() };
    let objective = |u: &[T]| -> (T, Vec<T>) {
        let theta = to_theta(u);
        let (f, g) = lik.evaluate(&theta, &design);
        let gu = g
            .iter()
            .zip(&theta)
            .zip(u.iter().zip(&lower))
            // At a bound only an inward-pointing descent direction is kept.
            .map(|((&gj, &tj), (&uj, &lo))| if uj > lo || gj < T::zero() { gj * tj } else { T::zero() })
            .collect();
        (f, gu)
    };

    let best = starting_points(&ls.theta, series, opts.multistart.max(1))
        .into_iter()
        .map(|start| {
            let u0 = start.iter().zip(&lower).map(|(&v, &lo)| v.ln().max(lo)).collect();
            bfgs(objective, u0, opts)
        })
        .reduce(|best, next| if next.f < best.f { next } else { best })
        .expect("at least one start");

    let params = ArchParams::from_theta(&to_theta(&best.x))?;
    let v = var_eps2_hat(&params, series)?;
    let cov_kind = match kind {
        EstimatorKind::Ml => CovarianceKind::MlNormal,
        _ => CovarianceKind::Qml,
    };
    let acov = estimate_acov(cov_kind, &params, series, v);
    Ok(Estimate {
        kind,
        theta: params.theta(),
        std_errors: acov.as_ref().map(|(_, se)| se.clone()),
        acov: acov.map(|(c, _)| c),
        var_eps2_hat: v,
        converged: best.converged,
        iterations: best.iterations,
        objective: Some(best.f),
        first_step: None,
        n_used: design.len(),
    })
}

/// The projected LS fit (with boundary values lifted), then evenly spread
/// persistence levels with `omega` matched to the sample mean of `X_t^2`.
fn starting_points<T: Scalar>(ls_theta: &[T], series: &Series<T>, count: usize) -> Vec<Vec<T>> {
    let p = ls_theta.len() - 1;
    let mut starts = Vec::with_capacity(count);
    let m = series.mean_x2();
    let mut first = ls_theta.to_vec();
    first[0] = first[0].max(T::lit(OMEGA_START_FRAC) * m);
    for a in &mut first[1..] {
        *a = a.max(T::lit(ALPHA_START_MIN));
    }
    starts.push(first);
    for k in 1..count {
        let persistence = T::lit(0.9 * k as f64 / count as f64);
        let per_lag = persistence / T::from_usize_lossy(p);
        let omega = m * (T::one() - persistence);
        starts.push(std::iter::once(omega).chain(std::iter::repeat_n(per_lag, p)).collect());
    }
    starts
}
