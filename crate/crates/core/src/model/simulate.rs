use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ArchParams, InnovationDist, Series};
use crate::error::{ArchError, Result};
use crate::rng::stream_rng;
use crate::scalar::Scalar;

pub const DEFAULT_BURN_IN: usize = 500;

/// Everything needed to draw one realization of an ARCH(p) process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar"))]
pub struct SimSpec<T> {
    pub params: ArchParams<T>,
    pub dist: InnovationDist,
    pub n: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    pub seed: u64,
    /// Independent random stream under the same seed (e.g. a replication index).
    #[serde(default)]
    pub stream: u64,
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

impl<T: Scalar> SimSpec<T> {
    pub fn new(params: ArchParams<T>, dist: InnovationDist, n: usize, seed: u64) -> Self {
        Self { params, dist, n, burn_in: DEFAULT_BURN_IN, seed, stream: 0 }
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(ArchError::domain("simulation length n must be >= 1"));
        }
        self.dist.validate()
    }
}

/// Simulates the process and returns the last `n` observations.
pub fn simulate<T: Scalar>(spec: &SimSpec<T>) -> Result<Series<T>> {
    simulate_with_path(spec).map(|(series, _)| series)
}

/// Like [`simulate`], also returning the conditional variances used for the
/// retained observations.
///
/// The `p` presample squares are set to the unconditional second moment when
/// `sum alpha < 1` and to `omega` otherwise; `burn_in` further draws are then
/// discarded.
pub fn simulate_with_path<T: Scalar>(spec: &SimSpec<T>) -> Result<(Series<T>, Vec<T>)> {
    spec.validate()?;
    let params = &spec.params;
    let p = params.p();
    let start = params.unconditional_variance().unwrap_or(params.omega());
    let total = spec.burn_in + spec.n;

    let sampler = spec.dist.sampler()?;
    let mut rng = stream_rng(spec.seed, spec.stream);

    let mut x2 = Vec::with_capacity(p + total);
    x2.resize(p, start);
    let mut x = Vec::with_capacity(spec.n);
    let mut sigma2 = Vec::with_capacity(spec.n);
    for step in 0..total {
        let t = p + step;
        let s = params.sigma2_at(&x2, t);
        let xt = s.sqrt() * T::lit(sampler.draw(&mut rng));
        x2.push(xt * xt);
        if step >= spec.burn_in {
            x.push(xt);
            sigma2.push(s);
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(ArchError::domain("simulated path overflowed; parameters are explosive"));
    }
    Ok((Series::new(x)?, sigma2))
}

/// `n` i.i.d. standardized innovations from stream `(seed, stream)`.
pub fn sample_innovations<T: Scalar>(dist: &InnovationDist, n: usize, seed: u64, stream: u64) -> Result<Vec<T>> {
    if n == 0 {
        return Err(ArchError::domain("sample size must be >= 1"));
    }
    let sampler = dist.sampler()?;
    let mut rng = stream_rng(seed, stream);
    Ok((0..n).map(|_| T::lit(sampler.draw(&mut rng))).collect())
}

/// Stratified draws: one inverse-CDF draw from each of the `n` equal-probability
/// strata `((i + u_i) / n)`, `u_i` uniform. Unbiased like plain sampling, with
/// far smaller variance for smooth functionals such as moments.
pub fn sample_innovations_stratified<T: Scalar>(
    dist: &InnovationDist,
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<Vec<T>> {
    if n == 0 {
        return Err(ArchError::domain("sample size must be >= 1"));
    }
    dist.validate()?;
    let mut rng = stream_rng(seed, stream);
    let nf = n as f64;
    (0..n)
        .map(|i| {
            let u: f64 = loop {
                let u: f64 = rng.random();
                let level = (i as f64 + u) / nf;
                if level > 0.0 && level < 1.0 {
                    break level;
                }
            };
            dist.quantile(u).map(T::lit)
        })
        .collect()
}
