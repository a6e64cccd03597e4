//! Estimation and diagnostics for ARCH(p) volatility models.
//!
//! The crate provides four estimators for the parameters of
//! `X_t = sigma_t * eps_t`, `sigma_t^2 = omega + sum_j alpha_j X_{t-j}^2`:
//!
//! * conditional least squares ([`estimators::fit_ls`]),
//! * the closed-form two-step estimating-function estimator ([`estimators::fit_ef`]),
//!   a weighted least-squares refit with weights `1 / sigma_t^4` taken at the LS fit,
//! * Gaussian quasi-maximum likelihood ([`estimators::fit_qml`]),
//! * maximum likelihood under a known innovation law ([`estimators::fit_ml`]).
//!
//! Around them sit asymptotic covariance machinery and stationarity checks
//! ([`diagnostics`]), influence functions under additive contamination
//! ([`influence`]), and a reproducible Monte Carlo harness ([`montecarlo`]).
//!
//! All numerical code is generic over the scalar type through [`Scalar`]
//! (implemented for `f32` and `f64`). The `*64` aliases below fix the scalar to
//! `f64`, which is what the command-line tool uses.

// `!(x > 0)` is used to reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod influence;
pub mod io;
pub mod linalg;
pub mod model;
pub mod montecarlo;
pub mod rng;
pub mod scalar;
pub mod stats;

pub use error::{ArchError, Result};
pub use estimators::{Estimate, EstimatorKind, OptimOptions};
pub use linalg::Matrix;
pub use model::{ArchParams, InnovationDist, Series, SimSpec};
pub use scalar::Scalar;

pub type ArchParams64 = ArchParams<f64>;
pub type Series64 = Series<f64>;
pub type SimSpec64 = SimSpec<f64>;
pub type Estimate64 = Estimate<f64>;
pub type Matrix64 = Matrix<f64>;
pub type MomentMatrices64 = diagnostics::MomentMatrices<f64>;
pub type InfluenceResult64 = influence::InfluenceResult<f64>;
pub type Contamination64 = influence::Contamination<f64>;
pub type ExperimentConfig64 = montecarlo::ExperimentConfig<f64>;
pub type McReport64 = montecarlo::McReport<f64>;

pub type ArchParams32 = ArchParams<f32>;
pub type Series32 = Series<f32>;
