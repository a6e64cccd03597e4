//! LS, EF, QML and ML estimators for ARCH(p).
//!
//! All estimators condition on the first `p` observations and use the
//! `n - p` equations `t = p+1..n`, so they see identical information.

mod closed_form;
mod likelihood;
mod mle;
mod optim;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize, Serializer};

pub use closed_form::{ef_functional, fit_ef, fit_ef_from, fit_ls, ls_functional, Design};
pub use likelihood::{
    ef_score, ef_score_frozen, gaussian_negloglik, gaussian_score, ml_negloglik, student_scale_information,
};
pub use mle::{fit_ml, fit_qml};
pub use optim::{bfgs, OptimOutcome};

use crate::diagnostics::{asymptotic_covariance, moment_matrices, CovarianceKind};
use crate::error::{ArchError, Result};
use crate::linalg::Matrix;
use crate::model::{sigma2_path, ArchParams, Series};
use crate::scalar::Scalar;
use crate::stats::population_variance;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EstimatorKind {
    Ls,
    Ef,
    Qml,
    Ml,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [EstimatorKind::Ls, EstimatorKind::Ml, EstimatorKind::Qml, EstimatorKind::Ef];
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorKind::Ls => "LS",
            EstimatorKind::Ef => "EF",
            EstimatorKind::Qml => "QML",
            EstimatorKind::Ml => "ML",
        })
    }
}

impl FromStr for EstimatorKind {
    type Err = ArchError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ls" => Ok(EstimatorKind::Ls),
            "ef" => Ok(EstimatorKind::Ef),
            "qml" => Ok(EstimatorKind::Qml),
            "ml" => Ok(EstimatorKind::Ml),
            other => Err(ArchError::Parse(format!("unknown estimator {other:?}"))),
        }
    }
}

/// Settings for the quasi-Newton optimizer behind QML and ML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimOptions {
    pub max_iters: usize,
    /// Converged when the sup-norm of the gradient (in log coordinates) is at
    /// most `grad_tol * max(1, |f|)`.
    pub grad_tol: f64,
    /// Also converged when a step moves no coordinate by more than
    /// `param_tol * (1 + |u|)`.
    pub param_tol: f64,
    /// Number of starting points; the first is always the projected LS fit.
    pub multistart: usize,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self { max_iters: 500, grad_tol: 1e-8, param_tol: 1e-10, multistart: 1 }
    }
}

/// A fitted parameter vector with its asymptotic covariance.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct Estimate<T> {
    pub kind: EstimatorKind,
    /// `(omega, alpha_1, ..., alpha_p)`.
    pub theta: Vec<T>,
    /// Estimated covariance of `theta` (already divided by the number of
    /// equations used).
    #[serde(serialize_with = "serialize_opt_matrix")]
    pub acov: Option<Matrix<T>>,
    pub std_errors: Option<Vec<T>>,
    /// Sample variance of the standardized squares `X_t^2 / sigma_t^2`.
    pub var_eps2_hat: T,
    pub converged: bool,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<T>,
    /// Pilot estimate used for the EF weights.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_step: Option<Vec<T>>,
    pub n_used: usize,
}

impl<T: Scalar> Estimate<T> {
    pub fn params(&self) -> ArchParams<T> {
        ArchParams::from_theta(&self.theta).expect("estimates are projected onto the parameter space")
    }

    pub fn omega(&self) -> T {
        self.theta[0]
    }

    pub fn alpha(&self) -> &[T] {
        &self.theta[1..]
    }
}

fn serialize_opt_matrix<T: Scalar, S: Serializer>(m: &Option<Matrix<T>>, s: S) -> std::result::Result<S::Ok, S::Error> {
    m.as_ref().map(Matrix::to_rows).serialize(s)
}

/// Lower bound on a fitted `omega`: `1e-8` times the mean of `X_t^2`.
pub fn omega_floor<T: Scalar>(series: &Series<T>) -> T {
    T::lit(1e-8) * series.mean_x2()
}

/// Clips `omega` to the floor and negative `alpha_j` to zero.
pub fn project<T: Scalar>(theta: &[T], floor: T) -> Result<ArchParams<T>> {
    let omega = theta[0].max(floor);
    let alpha = theta[1..].iter().map(|&a| a.max(T::zero())).collect();
    ArchParams::new(omega, alpha)
}

/// Minimum series length for estimation of an ARCH(p) model.
pub fn min_len(p: usize) -> usize {
    p + 2 * (p + 1)
}

pub(crate) fn check_inputs<T: Scalar>(series: &Series<T>, p: usize) -> Result<()> {
    if p == 0 {
        return Err(ArchError::domain("ARCH order p must be at least 1"));
    }
    series.require_len(min_len(p), &format!("ARCH({p}) estimation"))?;
    if !(omega_floor(series) > T::zero()) {
        return Err(ArchError::singular("series is identically zero"));
    }
    Ok(())
}

/// Sample variance of `X_t^2 / sigma_t^2(theta)` over `t = p+1..n`.
pub fn var_eps2_hat<T: Scalar>(params: &ArchParams<T>, series: &Series<T>) -> Result<T> {
    let path = sigma2_path(params, series)?;
    let p = params.p();
    let e2: Vec<T> = path.iter().zip(&series.x2()[p..]).map(|(&s, &x2)| x2 / s).collect();
    Ok(population_variance(&e2))
}

/// Covariance of `theta_hat` for the given estimator, evaluated at `params`.
/// Returns `None` when the moment matrices are singular.
pub(crate) fn estimate_acov<T: Scalar>(
    kind: CovarianceKind,
    params: &ArchParams<T>,
    series: &Series<T>,
    var_eps2: T,
) -> Option<(Matrix<T>, Vec<T>)> {
    let mats = moment_matrices(series, params).ok()?;
    let cov = asymptotic_covariance(kind, &mats, var_eps2).ok()?;
    let cov = cov.scale(T::one() / T::from_usize_lossy(mats.n_used));
    let se = cov.diagonal().into_iter().map(|v| v.max(T::zero()).sqrt()).collect();
    Some((cov, se))
}
