use super::Design;
use crate::error::{ArchError, Result};
use crate::linalg::dot;
use crate::model::{student_log_norm, ArchParams, InnovationDist, Series};
use crate::scalar::Scalar;

/// Per-observation negative log-likelihood as a function of `s = sigma_t^2`,
/// with its derivative in `s`.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Likelihood {
    /// `0.5 * (log s + x^2 / s)`, without the `log(2 pi)` constant.
    Gaussian,
    /// Unit-variance Student t with known degrees of freedom.
    Student { nu: f64 },
}

impl Likelihood {
    pub(crate) fn for_dist(dist: &InnovationDist) -> Result<Self> {
        match *dist {
            InnovationDist::Normal => Ok(Likelihood::Gaussian),
            InnovationDist::StudentT { nu } => {
                dist.validate()?;
                Ok(Likelihood::Student { nu })
            }
            other => Err(ArchError::domain(format!("no log-density implemented for {other}"))),
        }
    }

    #[inline]
    fn term<T: Scalar>(&self, x2: T, s: T) -> (T, T) {
        let half = T::lit(0.5);
        match *self {
            Likelihood::Gaussian => (half * (s.ln() + x2 / s), half * (T::one() / s - x2 / (s * s))),
            Likelihood::Student { nu } => {
                let nu_m2 = T::lit(nu - 2.0);
                let k = half * T::lit(nu + 1.0);
                let value = half * s.ln() + k * (x2 / (nu_m2 * s)).ln_1p() - T::lit(student_log_norm(nu));
                let deriv = half / s - k * x2 / (s * (nu_m2 * s + x2));
                (value, deriv)
            }
        }
    }

    /// Objective and gradient in `theta`; `+inf` when some `sigma_t^2 <= 0`.
    pub(crate) fn evaluate<T: Scalar>(&self, theta: &[T], design: &Design<T>) -> (T, Vec<T>) {
        let mut value = T::zero();
        let mut grad = vec![T::zero(); theta.len()];
        for (i, &x2) in design.response().iter().enumerate() {
            let y = design.row(i);
            let s = dot(theta, y);
            if !(s > T::zero()) {
                return (T::infinity(), grad);
            }
            let (v, d) = self.term(x2, s);
            value = value + v;
            for (g, &yj) in grad.iter_mut().zip(y) {
                *g = *g + d * yj;
            }
        }
        (value, grad)
    }
}

/// Gaussian negative log-likelihood `0.5 * sum [log sigma_t^2 + X_t^2 / sigma_t^2]`
/// over `t = p+1..n`, with its exact gradient.
pub fn gaussian_negloglik<T: Scalar>(theta: &ArchParams<T>, series: &Series<T>) -> Result<(T, Vec<T>)> {
    if series.len() <= theta.p() {
        return Err(ArchError::domain("series too short for the model order"));
    }
    let design = Design::from_series(series, theta.p());
    Ok(Likelihood::Gaussian.evaluate(&theta.theta(), &design))
}

/// Negative log-likelihood under the innovation law `dist`,
/// `-sum [log f(X_t / sigma_t) - log sigma_t]`, with its exact gradient.
///
/// For the normal law the additive constant is dropped so the objective is
/// exactly [`gaussian_negloglik`].
pub fn ml_negloglik<T: Scalar>(
    theta: &ArchParams<T>,
    series: &Series<T>,
    dist: &InnovationDist,
) -> Result<(T, Vec<T>)> {
    let lik = Likelihood::for_dist(dist)?;
    if series.len() <= theta.p() {
        return Err(ArchError::domain("series too short for the model order"));
    }
    let design = Design::from_series(series, theta.p());
    Ok(lik.evaluate(&theta.theta(), &design))
}

/// Optimal estimating function
/// `-sum Y_{t-1} (X_t^2 - sigma_t^2) / (Var(eps^2) sigma_t^4)` at `theta`.
pub fn ef_score<T: Scalar>(theta: &ArchParams<T>, series: &Series<T>, var_eps2: T) -> Result<Vec<T>> {
    ef_score_frozen(theta, theta, series, var_eps2)
}

/// Estimating function with the variance weights frozen at `pilot`:
/// `-sum Y_{t-1} (X_t^2 - theta^T Y_{t-1}) / (Var(eps^2) sigma_t^4(pilot))`.
///
/// Its root in `theta` is the weighted least-squares step of the EF estimator.
pub fn ef_score_frozen<T: Scalar>(
    theta: &ArchParams<T>,
    pilot: &ArchParams<T>,
    series: &Series<T>,
    var_eps2: T,
) -> Result<Vec<T>> {
    if !(var_eps2 > T::zero()) {
        return Err(ArchError::domain("Var(eps^2) must be positive"));
    }
    if theta.p() != pilot.p() || series.len() <= theta.p() {
        return Err(ArchError::domain("inconsistent model order or series too short"));
    }
    let design = Design::from_series(series, theta.p());
    let th = theta.theta();
    let pi = pilot.theta();
    let mut g = vec![T::zero(); th.len()];
    for (i, &x2) in design.response().iter().enumerate() {
        let y = design.row(i);
        let s = dot(&th, y);
        let sp = dot(&pi, y);
        let k = (x2 - s) / (var_eps2 * sp * sp);
        for (gj, &yj) in g.iter_mut().zip(y) {
            *gj = *gj - k * yj;
        }
    }
    Ok(g)
}

/// Gaussian form of the optimal estimating function,
/// `-sum (1 / (2 sigma_t^2)) Y_{t-1} (X_t^2 / sigma_t^2 - 1)`.
pub fn gaussian_score<T: Scalar>(theta: &ArchParams<T>, series: &Series<T>) -> Result<Vec<T>> {
    if series.len() <= theta.p() {
        return Err(ArchError::domain("series too short for the model order"));
    }
    let design = Design::from_series(series, theta.p());
    let th = theta.theta();
    let mut g = vec![T::zero(); th.len()];
    for (i, &x2) in design.response().iter().enumerate() {
        let y = design.row(i);
        let s = dot(&th, y);
        let k = (x2 / s - T::one()) / (T::lit(2.0) * s);
        for (gj, &yj) in g.iter_mut().zip(y) {
            *gj = *gj - k * yj;
        }
    }
    Ok(g)
}

/// `J = E[(1 + eps * f'(eps) / f(eps))^2]`, the information for the variance
/// scale. ML covariance is `(4 / J) Gamma^{-1}`; `J = 2` for the normal law
/// and `2 nu / (nu + 3)` for Student t.
pub fn student_scale_information(dist: &InnovationDist) -> Result<f64> {
    match *dist {
        InnovationDist::Normal => Ok(2.0),
        InnovationDist::StudentT { nu } => {
            dist.validate()?;
            Ok(2.0 * nu / (nu + 3.0))
        }
        other => Err(ArchError::domain(format!("no log-density implemented for {other}"))),
    }
}
