use serde::{Deserialize, Serialize};

use crate::error::{ArchError, Result};
use crate::scalar::Scalar;
use crate::stats::mean;

/// An observed stretch `X_1, ..., X_n` with its squares cached.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSeries<T>", bound(deserialize = "T: Scalar"))]
pub struct Series<T> {
    x: Vec<T>,
    #[serde(skip_serializing)]
    x2: Vec<T>,
}

#[derive(Deserialize)]
struct RawSeries<T> {
    x: Vec<T>,
}

impl<T: Scalar> TryFrom<RawSeries<T>> for Series<T> {
    type Error = ArchError;

    fn try_from(raw: RawSeries<T>) -> Result<Self> {
        Self::new(raw.x)
    }
}

impl<T: Scalar> Series<T> {
    pub fn new(x: Vec<T>) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ArchError::domain("series contains non-finite values"));
        }
        let x2 = x.iter().map(|&v| v * v).collect();
        Ok(Self { x, x2 })
    }

    pub fn x(&self) -> &[T] {
        &self.x
    }

    pub fn x2(&self) -> &[T] {
        &self.x2
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Regressor row `Y_{t-1} = (1, x2[t-1], ..., x2[t-p])` for 0-based `t >= p`.
    pub fn regressor(&self, t: usize, p: usize) -> Vec<T> {
        std::iter::once(T::one()).chain((1..=p).map(|j| self.x2[t - j])).collect()
    }

    /// Multiplies every observation by `c`.
    pub fn scaled(&self, c: T) -> Self {
        Self::new(self.x.iter().map(|&v| v * c).collect()).expect("scaling keeps values finite")
    }

    pub fn mean_x2(&self) -> T {
        mean(&self.x2)
    }

    pub(crate) fn require_len(&self, min: usize, what: &str) -> Result<()> {
        if self.len() < min {
            return Err(ArchError::domain(format!("{what} needs at least {min} observations, got {}", self.len())));
        }
        Ok(())
    }
}
