//! Replicated simulation study: squared bias, variance and MSE of each
//! estimator across sample sizes.
//!
//! Replication `r` simulates from RNG stream `(seed, r)` for every sample
//! size, so results do not depend on how replications are scheduled across
//! threads, and different `n` share random numbers.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ArchError, Result};
use crate::estimators::{fit_ef, fit_ls, fit_ml, fit_qml, Estimate, EstimatorKind, OptimOptions};
use crate::model::{simulate, ArchParams, InnovationDist, SimSpec, DEFAULT_BURN_IN};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ExperimentConfig<T> {
    pub p: usize,
    pub theta0: ArchParams<T>,
    pub dist: InnovationDist,
    pub n_values: Vec<usize>,
    pub reps: usize,
    #[serde(default = "all_estimators")]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_true")]
    pub include_nonconverged: bool,
    /// Worker threads; `None` uses the global pool. Results do not depend on it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default)]
    pub optim: OptimOptions,
}

fn all_estimators() -> Vec<EstimatorKind> {
    EstimatorKind::ALL.to_vec()
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

fn default_true() -> bool {
    true
}

impl<T: Scalar> ExperimentConfig<T> {
    pub fn new(theta0: ArchParams<T>, dist: InnovationDist, n_values: Vec<usize>, reps: usize, seed: u64) -> Self {
        Self {
            p: theta0.p(),
            theta0,
            dist,
            n_values,
            reps,
            estimators: all_estimators(),
            seed,
            burn_in: DEFAULT_BURN_IN,
            include_nonconverged: true,
            workers: None,
            optim: OptimOptions::default(),
        }
    }

    pub fn with_estimators(mut self, estimators: Vec<EstimatorKind>) -> Self {
        self.estimators = estimators;
        self
    }

    pub fn with_workers(mut self, workers: Option<usize>) -> Self {
        self.workers = workers;
        self
    }

    /// Reads a JSON or TOML file, chosen by extension (`.toml` or anything else).
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml")) {
            toml::from_str(&text).map_err(|e| ArchError::Parse(format!("{}: {e}", path.display())))?
        } else {
            serde_json::from_str(&text).map_err(|e| ArchError::Parse(format!("{}: {e}", path.display())))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p != self.theta0.p() {
            return Err(ArchError::domain(format!(
                "p = {} but theta0 has {} slope coefficients",
                self.p,
                self.theta0.p()
            )));
        }
        if self.reps == 0 {
            return Err(ArchError::domain("reps must be >= 1"));
        }
        if self.n_values.is_empty() {
            return Err(ArchError::domain("n_values must not be empty"));
        }
        if self.estimators.is_empty() {
            return Err(ArchError::domain("estimators must not be empty"));
        }
        if self.workers == Some(0) {
            return Err(ArchError::domain("workers must be >= 1"));
        }
        if self.estimators.contains(&EstimatorKind::Ml) && !self.dist.has_log_density() {
            return Err(ArchError::domain(format!("ML is not available for {} innovations", self.dist)));
        }
        self.dist.validate()?;
        Ok(())
    }
}

/// Per-coordinate summary over replications.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordSummary<T> {
    pub bias_sq: T,
    pub variance: T,
    pub mse: T,
}

/// `(mean - theta0)^2`, the `1/R` variance and the mean squared error, so that
/// `mse = bias_sq + variance` up to rounding.
pub fn summarize<T: Scalar>(thetas: &[Vec<T>], theta0: &ArchParams<T>) -> Result<Vec<CoordSummary<T>>> {
    if thetas.len() < 2 {
        return Err(ArchError::domain(format!("summarize needs at least 2 replications, got {}", thetas.len())));
    }
    summarize_any(thetas, theta0)
}

fn summarize_any<T: Scalar>(thetas: &[Vec<T>], theta0: &ArchParams<T>) -> Result<Vec<CoordSummary<T>>> {
    let truth = theta0.theta();
    if let Some(bad) = thetas.iter().position(|t| t.len() != truth.len()) {
        return Err(ArchError::domain(format!("replication {bad} has the wrong dimension")));
    }
    let r = T::from_usize_lossy(thetas.len());
    Ok(truth
        .iter()
        .enumerate()
        .map(|(j, &t0)| {
            // Deviations from the truth, so replicates equal to theta0 give exact zeros.
            let bias = thetas.iter().map(|t| t[j] - t0).sum::<T>() / r;
            let variance = thetas.iter().map(|t| (t[j] - t0 - bias).powi(2)).sum::<T>() / r;
            let mse = thetas.iter().map(|t| (t[j] - t0).powi(2)).sum::<T>() / r;
            CoordSummary { bias_sq: bias * bias, variance, mse }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McRow<T> {
    pub estimator: EstimatorKind,
    pub n: usize,
    pub coord: String,
    pub bias_sq: T,
    pub variance: T,
    pub mse: T,
    /// Replications that converged (all of them for LS and EF).
    pub n_converged: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FailureCount {
    pub estimator: EstimatorKind,
    pub n: usize,
    /// Fits that returned an error.
    pub failed: usize,
    /// Fits that finished without meeting the convergence test.
    pub nonconverged: usize,
    /// First error message, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct McReport<T> {
    pub config: ExperimentConfig<T>,
    pub rows: Vec<McRow<T>>,
    pub failures: Vec<FailureCount>,
}

impl<T: Scalar> McReport<T> {
    pub const CSV_HEADER: &'static str = "estimator,n,coord,bias_sq,variance,mse,n_converged";

    pub fn row(&self, estimator: EstimatorKind, n: usize, coord: &str) -> Option<&McRow<T>> {
        self.rows.iter().find(|r| r.estimator == estimator && r.n == n && r.coord == coord)
    }

    /// MSE of `alpha_1`.
    pub fn alpha_mse(&self, estimator: EstimatorKind, n: usize) -> Option<T> {
        self.row(estimator, n, "alpha1").map(|r| r.mse)
    }

    pub fn csv_rows(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| {
                format!("{},{},{},{},{},{},{}", r.estimator, r.n, r.coord, r.bias_sq, r.variance, r.mse, r.n_converged)
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for line in self.csv_rows() {
            out.push_str(&line);
            out.push('\n');
        }
        out
    }
}

pub fn coord_name(j: usize) -> String {
    if j == 0 {
        "omega".into()
    } else {
        format!("alpha{j}")
    }
}

type FitOutcome<T> = std::result::Result<(Vec<T>, bool), String>;

fn fit_one<T: Scalar>(
    kind: EstimatorKind,
    series: &crate::model::Series<T>,
    cfg: &ExperimentConfig<T>,
) -> Result<Estimate<T>> {
    match kind {
        EstimatorKind::Ls => fit_ls(series, cfg.p),
        EstimatorKind::Ef => fit_ef(series, cfg.p),
        EstimatorKind::Qml => fit_qml(series, cfg.p, &cfg.optim),
        EstimatorKind::Ml => fit_ml(series, cfg.p, &cfg.dist, &cfg.optim),
    }
}

/// One replication: every estimator at every sample size, indexed
/// `[n_index][estimator_index]`.
fn replicate<T: Scalar>(cfg: &ExperimentConfig<T>, r: u64) -> Vec<Vec<FitOutcome<T>>> {
    cfg.n_values
        .iter()
        .map(|&n| {
            let spec = SimSpec::new(cfg.theta0.clone(), cfg.dist, n, cfg.seed).with_burn_in(cfg.burn_in).with_stream(r);
            match simulate(&spec) {
                Ok(series) => cfg
                    .estimators
                    .iter()
                    .map(|&k| fit_one(k, &series, cfg).map(|e| (e.theta, e.converged)).map_err(|e| e.to_string()))
                    .collect(),
                Err(e) => vec![Err(format!("simulation failed: {e}")); cfg.estimators.len()],
            }
        })
        .collect()
}

pub fn run_experiment<T: Scalar>(cfg: &ExperimentConfig<T>) -> Result<McReport<T>> {
    cfg.validate()?;
    let work = || -> Vec<Vec<Vec<FitOutcome<T>>>> {
        (0..cfg.reps as u64).into_par_iter().map(|r| replicate(cfg, r)).collect()
    };
    let per_rep = match cfg.workers {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| ArchError::domain(format!("cannot start {k} workers: {e}")))?
            .install(work),
        None => work(),
    };

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (ni, &n) in cfg.n_values.iter().enumerate() {
        for (ki, &kind) in cfg.estimators.iter().enumerate() {
            let mut kept = Vec::with_capacity(cfg.reps);
            let mut failed = 0;
            let mut nonconverged = 0;
            let mut first_error = None;
            for rep in &per_rep {
                match &rep[ni][ki] {
                    Ok((theta, converged)) => {
                        if !converged {
                            nonconverged += 1;
                        }
                        if *converged || cfg.include_nonconverged {
                            kept.push(theta.clone());
                        }
                    }
                    Err(msg) => {
                        failed += 1;
                        first_error.get_or_insert_with(|| msg.clone());
                    }
                }
            }
            let n_converged = cfg.reps - failed - nonconverged;
            let summary = if kept.is_empty() {
                vec![CoordSummary { bias_sq: T::nan(), variance: T::nan(), mse: T::nan() }; cfg.p + 1]
            } else {
                summarize_any(&kept, &cfg.theta0)?
            };
            for (j, s) in summary.into_iter().enumerate() {
                rows.push(McRow {
                    estimator: kind,
                    n,
                    coord: coord_name(j),
                    bias_sq: s.bias_sq,
                    variance: s.variance,
                    mse: s.mse,
                    n_converged,
                });
            }
            if failed > 0 || nonconverged > 0 {
                failures.push(FailureCount { estimator: kind, n, failed, nonconverged, first_error });
            }
        }
    }
    Ok(McReport { config: cfg.clone(), rows, failures })
}
