//! Sample moments shared by the estimators and the Monte Carlo harness.

use crate::scalar::Scalar;

pub fn mean<T: Scalar>(v: &[T]) -> T {
    if v.is_empty() {
        return T::nan();
    }
    v.iter().copied().sum::<T>() / T::from_usize_lossy(v.len())
}

/// Variance with the `1/N` normalizer.
pub fn population_variance<T: Scalar>(v: &[T]) -> T {
    let m = mean(v);
    v.iter().map(|&a| (a - m) * (a - m)).sum::<T>() / T::from_usize_lossy(v.len())
}

/// Standard error of the mean using the `1/(N-1)` variance.
pub fn standard_error<T: Scalar>(v: &[T]) -> T {
    let n = T::from_usize_lossy(v.len());
    let m = mean(v);
    let ss: T = v.iter().map(|&a| (a - m) * (a - m)).sum();
    (ss / (n - T::one()) / n).sqrt()
}
