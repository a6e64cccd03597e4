//! The ARCH(p) data-generating process.

mod innovation;
mod params;
mod series;
mod simulate;

pub(crate) use innovation::student_log_norm;
pub use innovation::InnovationDist;
pub use params::ArchParams;
pub use series::Series;
pub use simulate::{
    sample_innovations, sample_innovations_stratified, simulate, simulate_with_path, SimSpec, DEFAULT_BURN_IN,
};

use crate::error::{ArchError, Result};
use crate::scalar::Scalar;

/// Validates `(omega, alpha)` and builds [`ArchParams`].
pub fn validate_params<T: Scalar>(omega: T, alpha: &[T]) -> Result<ArchParams<T>> {
    ArchParams::new(omega, alpha.to_vec())
}

/// Conditional variances `sigma_t^2 = omega + sum_j alpha_j x2[t-j]` for
/// `t = p+1..n` (1-based), i.e. the `n - p` points whose regressors are all
/// observed.
pub fn sigma2_path<T: Scalar>(params: &ArchParams<T>, series: &Series<T>) -> Result<Vec<T>> {
    let p = params.p();
    if series.len() <= p {
        return Err(ArchError::domain(format!("series of length {} is too short for an ARCH({p}) path", series.len())));
    }
    Ok((p..series.len()).map(|t| params.sigma2_at(series.x2(), t)).collect())
}
