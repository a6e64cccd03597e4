use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma as GammaCdf, Normal as NormalCdf, StudentsT as StudentsTCdf};
use statrs::function::gamma::ln_gamma;

use crate::error::{ArchError, Result};

/// Innovation law, standardized to mean 0 and variance 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[serde(try_from = "DistRepr")]
pub enum InnovationDist {
    Normal,
    /// Student t with `nu` degrees of freedom, scaled by `sqrt((nu - 2) / nu)`.
    StudentT {
        nu: f64,
    },
    /// Laplace with scale `1 / sqrt 2`.
    DoubleExponential,
    /// Logistic with scale `sqrt 3 / pi`.
    Logistic,
    /// `(G - k) / sqrt k` with `G ~ Gamma(k, 1)`.
    GammaNormalized {
        shape: f64,
    },
}

/// Accepts either the tagged form or a name understood by `FromStr`.
#[derive(Deserialize)]
#[serde(untagged)]
enum DistRepr {
    Name(String),
    Tagged(Tagged),
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Tagged {
    Normal,
    StudentT { nu: f64 },
    DoubleExponential,
    Logistic,
    GammaNormalized { shape: f64 },
}

impl TryFrom<DistRepr> for InnovationDist {
    type Error = ArchError;

    fn try_from(r: DistRepr) -> Result<Self> {
        let d = match r {
            DistRepr::Name(s) => return s.parse(),
            DistRepr::Tagged(Tagged::Normal) => InnovationDist::Normal,
            DistRepr::Tagged(Tagged::StudentT { nu }) => InnovationDist::StudentT { nu },
            DistRepr::Tagged(Tagged::DoubleExponential) => InnovationDist::DoubleExponential,
            DistRepr::Tagged(Tagged::Logistic) => InnovationDist::Logistic,
            DistRepr::Tagged(Tagged::GammaNormalized { shape }) => InnovationDist::GammaNormalized { shape },
        };
        d.validate()?;
        Ok(d)
    }
}

/// Pre-built sampler for one [`InnovationDist`].
#[derive(Clone, Debug)]
pub(crate) enum Sampler {
    Normal,
    StudentT(StudentT<f64>, f64),
    DoubleExponential,
    Logistic,
    Gamma(Gamma<f64>, f64),
}

impl Sampler {
    pub(crate) fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Normal => StandardNormal.sample(rng),
            Sampler::StudentT(t, scale) => t.sample(rng) * scale,
            Sampler::DoubleExponential | Sampler::Logistic => {
                // Open interval so the inverse CDF stays finite.
                let u: f64 = loop {
                    let u: f64 = rng.random();
                    if u > 0.0 {
                        break u;
                    }
                };
                InnovationDist::quantile_closed_form(self, u)
            }
            Sampler::Gamma(g, k) => (g.sample(rng) - k) / k.sqrt(),
        }
    }
}

impl InnovationDist {
    pub fn student_t(nu: f64) -> Result<Self> {
        let d = InnovationDist::StudentT { nu };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            InnovationDist::StudentT { nu } if !(nu > 2.0) || !nu.is_finite() => {
                Err(ArchError::domain(format!("student t needs nu > 2 for unit variance (got {nu})")))
            }
            InnovationDist::GammaNormalized { shape } if !(shape > 0.0) || !shape.is_finite() => {
                Err(ArchError::domain(format!("gamma shape must be > 0 (got {shape})")))
            }
            _ => Ok(()),
        }
    }

    pub(crate) fn sampler(&self) -> Result<Sampler> {
        self.validate()?;
        Ok(match *self {
            InnovationDist::Normal => Sampler::Normal,
            InnovationDist::StudentT { nu } => Sampler::StudentT(
                StudentT::new(nu).map_err(|e| ArchError::domain(e.to_string()))?,
                ((nu - 2.0) / nu).sqrt(),
            ),
            InnovationDist::DoubleExponential => Sampler::DoubleExponential,
            InnovationDist::Logistic => Sampler::Logistic,
            InnovationDist::GammaNormalized { shape } => {
                Sampler::Gamma(Gamma::new(shape, 1.0).map_err(|e| ArchError::domain(e.to_string()))?, shape)
            }
        })
    }

    fn quantile_closed_form(sampler: &Sampler, u: f64) -> f64 {
        match sampler {
            Sampler::DoubleExponential => {
                let b = std::f64::consts::FRAC_1_SQRT_2;
                if u < 0.5 {
                    b * (2.0 * u).ln()
                } else {
                    -b * (2.0 * (1.0 - u)).ln()
                }
            }
            Sampler::Logistic => {
                let s = 3f64.sqrt() / std::f64::consts::PI;
                s * (u / (1.0 - u)).ln()
            }
            _ => unreachable!("closed-form quantile only for Laplace and logistic"),
        }
    }

    /// Inverse CDF of the standardized law at `u` in `(0, 1)`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        self.validate()?;
        if !(u > 0.0 && u < 1.0) {
            return Err(ArchError::domain(format!("quantile level must lie in (0, 1), got {u}")));
        }
        fn map_err(e: impl std::fmt::Display) -> ArchError {
            ArchError::domain(e.to_string())
        }
        Ok(match *self {
            InnovationDist::Normal => NormalCdf::new(0.0, 1.0).map_err(map_err)?.inverse_cdf(u),
            InnovationDist::StudentT { nu } => {
                StudentsTCdf::new(0.0, 1.0, nu).map_err(map_err)?.inverse_cdf(u) * ((nu - 2.0) / nu).sqrt()
            }
            InnovationDist::DoubleExponential => Self::quantile_closed_form(&Sampler::DoubleExponential, u),
            InnovationDist::Logistic => Self::quantile_closed_form(&Sampler::Logistic, u),
            InnovationDist::GammaNormalized { shape } => {
                (GammaCdf::new(shape, 1.0).map_err(map_err)?.inverse_cdf(u) - shape) / shape.sqrt()
            }
        })
    }

    /// Excess kurtosis `E eps^4 - 3`, when the fourth moment is finite.
    pub fn kurtosis_excess(&self) -> Result<f64> {
        Ok(match *self {
            InnovationDist::Normal => 0.0,
            InnovationDist::StudentT { nu } => {
                if !(nu > 4.0) {
                    return Err(ArchError::domain(format!("student t fourth moment needs nu > 4 (got {nu})")));
                }
                6.0 / (nu - 4.0)
            }
            InnovationDist::DoubleExponential => 3.0,
            InnovationDist::Logistic => 1.2,
            InnovationDist::GammaNormalized { shape } => 6.0 / shape,
        })
    }

    pub fn fourth_moment(&self) -> Result<f64> {
        Ok(self.kurtosis_excess()? + 3.0)
    }

    /// `Var(eps^2) = E eps^4 - 1`.
    pub fn var_eps2(&self) -> Result<f64> {
        Ok(self.kurtosis_excess()? + 2.0)
    }

    /// `E eps^8`, when finite.
    pub fn eighth_moment(&self) -> Result<f64> {
        Ok(match *self {
            InnovationDist::Normal => 105.0,
            InnovationDist::StudentT { nu } => {
                if !(nu > 8.0) {
                    return Err(ArchError::domain(format!("student t eighth moment needs nu > 8 (got {nu})")));
                }
                105.0 * (nu - 2.0).powi(3) / ((nu - 4.0) * (nu - 6.0) * (nu - 8.0))
            }
            // 8! b^8 with b^2 = 1/2.
            InnovationDist::DoubleExponential => 40320.0 / 16.0,
            // s^8 pi^8 (2^8 - 2) |B_8| with s^2 pi^2 = 3.
            InnovationDist::Logistic => 81.0 * 254.0 / 30.0,
            InnovationDist::GammaNormalized { shape } => {
                let k = shape;
                let mut central = 0.0;
                let mut raw = 1.0;
                for m in 0..=8u32 {
                    if m > 0 {
                        raw *= k + f64::from(m - 1);
                    }
                    central += binomial(8, m) * raw * (-k).powi(8 - m as i32);
                }
                central / k.powi(4)
            }
        })
    }

    pub fn has_log_density(&self) -> bool {
        matches!(self, InnovationDist::Normal | InnovationDist::StudentT { .. })
    }

    /// `log f(e)` for laws with an implemented density.
    pub fn log_density(&self, e: f64) -> Result<f64> {
        match *self {
            InnovationDist::Normal => Ok(-0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * e * e),
            InnovationDist::StudentT { nu } => {
                self.validate()?;
                Ok(student_log_norm(nu) - 0.5 * (nu + 1.0) * (1.0 + e * e / (nu - 2.0)).ln())
            }
            _ => Err(ArchError::domain(format!("no log-density implemented for {self}"))),
        }
    }
}

/// Normalizing constant of the unit-variance t density.
pub(crate) fn student_log_norm(nu: f64) -> f64 {
    ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * ((nu - 2.0) * std::f64::consts::PI).ln()
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

impl fmt::Display for InnovationDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InnovationDist::Normal => write!(f, "normal"),
            InnovationDist::StudentT { nu } => write!(f, "t{nu}"),
            InnovationDist::DoubleExponential => write!(f, "double_exponential"),
            InnovationDist::Logistic => write!(f, "logistic"),
            InnovationDist::GammaNormalized { shape } => write!(f, "gamma:{shape}"),
        }
    }
}

impl FromStr for InnovationDist {
    type Err = ArchError;

    /// Accepts `normal`, `t5` / `t:5` / `student_t:5`, `laplace` /
    /// `double_exponential`, `logistic`, and `gamma:<shape>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let parse_num =
            |v: &str| v.parse::<f64>().map_err(|_| ArchError::Parse(format!("bad distribution parameter in {s:?}")));
        let dist = match s.as_str() {
            "normal" | "gaussian" => InnovationDist::Normal,
            "laplace" | "double_exponential" => InnovationDist::DoubleExponential,
            "logistic" => InnovationDist::Logistic,
            _ => {
                if let Some(v) = s.strip_prefix("student_t:").or_else(|| s.strip_prefix("t:")) {
                    InnovationDist::StudentT { nu: parse_num(v)? }
                } else if let Some(v) = s.strip_prefix("gamma:") {
                    InnovationDist::GammaNormalized { shape: parse_num(v)? }
                } else if let Some(v) = s.strip_prefix('t') {
                    InnovationDist::StudentT { nu: parse_num(v)? }
                } else {
                    return Err(ArchError::Parse(format!("unknown distribution {s:?}")));
                }
            }
        };
        dist.validate()?;
        Ok(dist)
    }
}
