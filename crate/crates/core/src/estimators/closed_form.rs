use super::{check_inputs, estimate_acov, omega_floor, project, var_eps2_hat, Estimate, EstimatorKind};
use crate::diagnostics::CovarianceKind;
use crate::error::{ArchError, Result};
use crate::linalg::{dot, Matrix};
use crate::model::{sigma2_path, ArchParams, Series};
use crate::scalar::Scalar;

/// Regression arrays of the autoregressive form `X_t^2 = theta^T Y_{t-1} + eta_t`.
///
/// Row `i` holds `Y_{t-1} = (1, X_{t-1}^2, ..., X_{t-p}^2)` and the response
/// holds `X_t^2`, for `t = p+1..n`. The arrays can also be built directly,
/// which is how contaminated data enter the influence-function oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct Design<T> {
    rows: Matrix<T>,
    response: Vec<T>,
}

impl<T: Scalar> Design<T> {
    pub fn from_series(series: &Series<T>, p: usize) -> Self {
        let n = series.len();
        let x2 = series.x2();
        let rows = Matrix::from_fn(n - p, p + 1, |i, j| if j == 0 { T::one() } else { x2[i + p - j] });
        Self { rows, response: x2[p..].to_vec() }
    }

    pub fn new(rows: Matrix<T>, response: Vec<T>) -> Result<Self> {
        if rows.nrows() != response.len() || rows.ncols() < 2 {
            return Err(ArchError::domain("design rows and response disagree in shape"));
        }
        Ok(Self { rows, response })
    }

    pub fn len(&self) -> usize {
        self.response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.response.is_empty()
    }

    pub fn p(&self) -> usize {
        self.rows.ncols() - 1
    }

    pub fn row(&self, i: usize) -> &[T] {
        self.rows.row(i)
    }

    pub fn response(&self) -> &[T] {
        &self.response
    }

    /// `sum_i w_i Y_i Y_i^T` and `sum_i w_i Y_i r_i`. Weights are divided by
    /// their maximum first, which leaves the solution unchanged and makes a
    /// constant weight sequence reproduce the unweighted sums bit for bit.
    pub fn normal_equations(&self, weights: Option<&[T]>) -> (Matrix<T>, Vec<T>) {
        let k = self.p() + 1;
        let mut a = Matrix::zeros(k, k);
        let mut b = vec![T::zero(); k];
        let wmax = weights.map(|w| w.iter().fold(T::zero(), |m, &v| m.max(v)));
        for i in 0..self.len() {
            let w = match (weights, wmax) {
                (Some(w), Some(m)) => w[i] / m,
                _ => T::one(),
            };
            let y = self.row(i);
            a.add_outer(y, y, w);
            let wr = w * self.response[i];
            for (bj, &yj) in b.iter_mut().zip(y) {
                *bj = *bj + wr * yj;
            }
        }
        (a, b)
    }

    pub fn solve(&self, weights: Option<&[T]>) -> Result<Vec<T>> {
        let (a, b) = self.normal_equations(weights);
        a.solve_spd(&b).map_err(|e| match e {
            ArchError::Singular(msg) => ArchError::Singular(format!("design matrix is rank deficient: {msg}")),
            other => other,
        })
    }

    /// `1 / (pilot^T Y_i)^2`, failing when a fitted variance is below `floor`.
    pub fn variance_weights(&self, pilot: &[T], floor: T) -> Result<Vec<T>> {
        (0..self.len())
            .map(|i| {
                let s = dot(pilot, self.row(i));
                if !(s >= floor && s > T::zero()) {
                    return Err(ArchError::DegenerateWeights(format!(
                        "first-step variance {s} at row {i} is below the floor {floor}"
                    )));
                }
                Ok(T::one() / (s * s))
            })
            .collect()
    }
}

/// Unconstrained conditional least-squares solution `(Y^T Y)^{-1} Y^T X`.
pub fn ls_functional<T: Scalar>(design: &Design<T>) -> Result<Vec<T>> {
    design.solve(None)
}

/// Weighted least squares with weights `1 / sigma_t^4(pilot)`, unconstrained.
pub fn ef_functional<T: Scalar>(design: &Design<T>, pilot: &[T], floor: T) -> Result<Vec<T>> {
    let w = design.variance_weights(pilot, floor)?;
    design.solve(Some(&w))
}

/// Conditional least squares, projected onto `omega >= floor`, `alpha >= 0`.
pub fn fit_ls<T: Scalar>(series: &Series<T>, p: usize) -> Result<Estimate<T>> {
    check_inputs(series, p)?;
    let design = Design::from_series(series, p);
    let raw = ls_functional(&design)?;
    let params = project(&raw, omega_floor(series))?;
    let v = var_eps2_hat(&params, series)?;
    let acov = estimate_acov(CovarianceKind::Ls, &params, series, v);
    Ok(Estimate {
        kind: EstimatorKind::Ls,
        theta: params.theta(),
        std_errors: acov.as_ref().map(|(_, se)| se.clone()),
        acov: acov.map(|(c, _)| c),
        var_eps2_hat: v,
        converged: true,
        iterations: 0,
        objective: None,
        first_step: None,
        n_used: design.len(),
    })
}

/// The two-step estimating-function estimator: LS, then weighted least squares
/// with weights `1 / sigma_t^4(theta_LS)`.
pub fn fit_ef<T: Scalar>(series: &Series<T>, p: usize) -> Result<Estimate<T>> {
    let ls = fit_ls(series, p)?;
    fit_ef_from(series, &ls.params())
}

/// Second step of [`fit_ef`] with an arbitrary pilot supplying the weights.
pub fn fit_ef_from<T: Scalar>(series: &Series<T>, pilot: &ArchParams<T>) -> Result<Estimate<T>> {
    let p = pilot.p();
    check_inputs(series, p)?;
    let floor = omega_floor(series);
    let design = Design::from_series(series, p);
    // sigma2_path agrees with pilot^T Y row by row; the explicit path keeps the
    // floor check tied to the model definition.
    debug_assert_eq!(sigma2_path(pilot, series)?.len(), design.len());
    let raw = ef_functional(&design, &pilot.theta(), floor)?;
    let params = project(&raw, floor)?;
    let v = var_eps2_hat(&params, series)?;
    let acov = estimate_acov(CovarianceKind::Ef, &params, series, v);
    Ok(Estimate {
        kind: EstimatorKind::Ef,
        theta: params.theta(),
        std_errors: acov.as_ref().map(|(_, se)| se.clone()),
        acov: acov.map(|(c, _)| c),
        var_eps2_hat: v,
        converged: true,
        iterations: 0,
        objective: None,
        first_step: Some(pilot.theta()),
        n_used: design.len(),
    })
}
