use serde::{Deserialize, Serialize};

use crate::error::{ArchError, Result};
use crate::scalar::Scalar;

/// ARCH(p) parameters `theta = (omega, alpha_1, ..., alpha_p)`.
///
/// `omega > 0` and `alpha_j >= 0`; a zero last lag is accepted so fitted values
/// on the boundary remain representable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams<T>", bound(deserialize = "T: Scalar"))]
pub struct ArchParams<T> {
    omega: T,
    alpha: Vec<T>,
}

#[derive(Deserialize)]
struct RawParams<T> {
    omega: T,
    alpha: Vec<T>,
}

impl<T: Scalar> TryFrom<RawParams<T>> for ArchParams<T> {
    type Error = ArchError;

    fn try_from(raw: RawParams<T>) -> Result<Self> {
        Self::new(raw.omega, raw.alpha)
    }
}

impl<T: Scalar> ArchParams<T> {
    pub fn new(omega: T, alpha: Vec<T>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(ArchError::domain("ARCH order p must be at least 1"));
        }
        if !omega.is_finite() || alpha.iter().any(|a| !a.is_finite()) {
            return Err(ArchError::domain("parameters must be finite"));
        }
        if !(omega > T::zero()) {
            return Err(ArchError::domain(format!("omega must be > 0 (got {omega})")));
        }
        if let Some((j, a)) = alpha.iter().enumerate().find(|(_, &a)| a < T::zero()) {
            return Err(ArchError::domain(format!("alpha_{} must be >= 0 (got {a})", j + 1)));
        }
        Ok(Self { omega, alpha })
    }

    /// Builds parameters from a `theta` vector laid out as `(omega, alpha...)`.
    pub fn from_theta(theta: &[T]) -> Result<Self> {
        match theta.split_first() {
            Some((&omega, alpha)) => Self::new(omega, alpha.to_vec()),
            None => Err(ArchError::domain("empty parameter vector")),
        }
    }

    pub fn omega(&self) -> T {
        self.omega
    }

    pub fn alpha(&self) -> &[T] {
        &self.alpha
    }

    pub fn p(&self) -> usize {
        self.alpha.len()
    }

    pub fn theta(&self) -> Vec<T> {
        std::iter::once(self.omega).chain(self.alpha.iter().copied()).collect()
    }

    pub fn alpha_sum(&self) -> T {
        self.alpha.iter().copied().sum()
    }

    /// `E X_t^2 = omega / (1 - sum alpha)` when `sum alpha < 1`.
    pub fn unconditional_variance(&self) -> Option<T> {
        let s = self.alpha_sum();
        (s < T::one()).then(|| self.omega / (T::one() - s))
    }

    /// `omega + sum_j alpha_j x2[t - j]`; requires `t >= p`.
    pub(crate) fn sigma2_at(&self, x2: &[T], t: usize) -> T {
        self.alpha.iter().enumerate().fold(self.omega, |s, (j, &a)| s + a * x2[t - 1 - j])
    }
}
