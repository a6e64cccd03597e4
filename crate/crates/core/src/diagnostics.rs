//! Stationarity and moment conditions, sample moment matrices, and the
//! asymptotic covariances of the four estimators.
//!
//! The random companion matrix of an ARCH(p) process is the `p x p` matrix
//! with first row `(alpha_1 eps_t^2, ..., alpha_p eps_t^2)` and ones on the
//! subdiagonal. Its top Lyapunov exponent decides strict stationarity; the
//! spectral norm of `E[A^{⊗4}]` below one gives the finite eighth moments the
//! LS asymptotics rely on.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ArchError, Result};
use crate::linalg::{spectral_norm_op, Matrix};
use crate::model::{
    sample_innovations, sample_innovations_stratified, sigma2_path, ArchParams, InnovationDist, Series,
};
use crate::scalar::Scalar;
use crate::stats::{mean, standard_error};

/// Largest Kronecker-power dimension `p^s` accepted by [`sigma_s_norm`].
pub const MAX_KRON_DIM: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceKind {
    Ls,
    Ef,
    Qml,
    MlNormal,
}

/// Sample versions of `U = E[Y Y^T]`, `R = E[sigma^4 Y Y^T]` and
/// `Gamma = E[Y Y^T / sigma^4]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentMatrices<T> {
    pub u_hat: Matrix<T>,
    pub r_hat: Matrix<T>,
    pub gamma_hat: Matrix<T>,
    pub n_used: usize,
}

/// Averages over `t = p+1..n` with `sigma_t^2` taken from `params`.
pub fn moment_matrices<T: Scalar>(series: &Series<T>, params: &ArchParams<T>) -> Result<MomentMatrices<T>> {
    let p = params.p();
    if series.len() < 2 * p + 1 {
        return Err(ArchError::domain(format!("moment matrices for p = {p} need at least {} observations", 2 * p + 1)));
    }
    let path = sigma2_path(params, series)?;
    let k = p + 1;
    let mut u = Matrix::zeros(k, k);
    let mut r = Matrix::zeros(k, k);
    let mut g = Matrix::zeros(k, k);
    for (i, &s) in path.iter().enumerate() {
        let y = series.regressor(i + p, p);
        let s2 = s * s;
        u.add_outer(&y, &y, T::one());
        r.add_outer(&y, &y, s2);
        g.add_outer(&y, &y, T::one() / s2);
    }
    let inv_n = T::one() / T::from_usize_lossy(path.len());
    let mats = MomentMatrices {
        u_hat: u.scale(inv_n).symmetrized(),
        r_hat: r.scale(inv_n).symmetrized(),
        gamma_hat: g.scale(inv_n).symmetrized(),
        n_used: path.len(),
    };
    for (name, m) in [("U", &mats.u_hat), ("Gamma", &mats.gamma_hat)] {
        let cond = m.equilibrated_condition();
        if cond > crate::linalg::max_condition::<T>() {
            return Err(ArchError::singular(format!(
                "sample {name} matrix has condition number {:e}",
                cond.to_f64_lossy()
            )));
        }
    }
    Ok(mats)
}

/// Asymptotic covariance of `sqrt(n) (theta_hat - theta_0)`:
/// `Var(eps^2) U^{-1} R U^{-1}` for LS, `Var(eps^2) Gamma^{-1}` for EF and QML,
/// and `2 Gamma^{-1}` for Gaussian ML.
pub fn asymptotic_covariance<T: Scalar>(
    kind: CovarianceKind,
    mats: &MomentMatrices<T>,
    var_eps2: T,
) -> Result<Matrix<T>> {
    if !(var_eps2 > T::zero()) || !var_eps2.is_finite() {
        return Err(ArchError::domain(format!("Var(eps^2) must be positive and finite, got {var_eps2}")));
    }
    Ok(match kind {
        CovarianceKind::Ls => sandwich(mats)?.scale(var_eps2),
        CovarianceKind::Ef | CovarianceKind::Qml => mats.gamma_hat.inverse_spd()?.scale(var_eps2),
        CovarianceKind::MlNormal => mats.gamma_hat.inverse_spd()?.scale(T::lit(2.0)),
    })
}

fn sandwich<T: Scalar>(mats: &MomentMatrices<T>) -> Result<Matrix<T>> {
    let u_inv = mats.u_hat.inverse_spd()?;
    Ok(u_inv.matmul(&mats.r_hat).matmul(&u_inv).symmetrized())
}

/// Smallest eigenvalue of `U^{-1} R U^{-1} - Gamma^{-1}`.
///
/// Non-negative for genuine moment matrices (LS is never more efficient than
/// EF); zero exactly when `sigma_t^2` is constant.
pub fn efficiency_gap<T: Scalar>(mats: &MomentMatrices<T>) -> Result<T> {
    let gap = sandwich(mats)?.sub(&mats.gamma_hat.inverse_spd()?);
    Ok(gap.symmetrized().min_eigenvalue())
}

/// Deterministic part of the companion matrix: `alpha` in the first row.
fn coefficient_row<T: Scalar>(alpha: &[T]) -> Matrix<T> {
    let p = alpha.len();
    Matrix::from_fn(p, p, |i, j| if i == 0 { alpha[j] } else { T::zero() })
}

/// Ones on the subdiagonal.
fn shift<T: Scalar>(p: usize) -> Matrix<T> {
    Matrix::from_fn(p, p, |i, j| if i == j + 1 { T::one() } else { T::zero() })
}

/// `A_t` for one squared innovation.
pub fn companion_matrix<T: Scalar>(alpha: &[T], eps2: T) -> Matrix<T> {
    coefficient_row(alpha).scale(eps2).add(&shift(alpha.len()))
}

/// Monte Carlo estimate of the top Lyapunov exponent
/// `lim (1/t) log ||A_1 A_2 ... A_t||` and its standard error across
/// replications.
///
/// Returns `(-inf, 0)` when the product degenerates to zero (e.g. all
/// `alpha_j = 0`).
pub fn lyapunov_exponent<T: Scalar>(
    params: &ArchParams<T>,
    dist: &InnovationDist,
    horizon: usize,
    reps: usize,
    seed: u64,
) -> Result<(T, T)> {
    if horizon < 100 {
        return Err(ArchError::domain(format!("horizon must be >= 100, got {horizon}")));
    }
    if reps == 0 {
        return Err(ArchError::domain("reps must be >= 1"));
    }
    dist.validate()?;
    let p = params.p();
    let row = coefficient_row(params.alpha());
    let sub = shift::<T>(p);
    let per_rep: Vec<T> = (0..reps as u64)
        .into_par_iter()
        .map(|r| -> Result<T> {
            let eps: Vec<T> = sample_innovations(dist, horizon, seed, r)?;
            let mut prod = Matrix::identity(p);
            let mut log_norm = T::zero();
            for e in eps {
                let a = row.scale(e * e).add(&sub);
                prod = prod.matmul(&a);
                let nrm = prod.frobenius_norm();
                if nrm == T::zero() {
                    return Ok(T::neg_infinity());
                }
                log_norm = log_norm + nrm.ln();
                prod = prod.scale(T::one() / nrm);
            }
            Ok(log_norm / T::from_usize_lossy(horizon))
        })
        .collect::<Result<_>>()?;
    if per_rep.iter().any(|v| *v == T::neg_infinity()) {
        return Ok((T::neg_infinity(), T::zero()));
    }
    let se = if reps > 1 { standard_error(&per_rep) } else { T::infinity() };
    Ok((mean(&per_rep), se))
}

/// `|| E[A_t^{⊗s}] ||_2` with the expectation replaced by an average over
/// `mc_samples` stratified innovation draws.
///
/// Because `A_t = eps_t^2 B + J` with `B`, `J` fixed, the average of the
/// Kronecker powers expands into `sum_S m_|S| ⊗_i (B if i in S else J)`,
/// where `m_k` is the sample mean of `eps^{2k}`. The operator is applied in
/// that factored form, so the `p^s x p^s` matrix is never materialized.
pub fn sigma_s_norm<T: Scalar>(
    params: &ArchParams<T>,
    dist: &InnovationDist,
    s: usize,
    mc_samples: usize,
    seed: u64,
) -> Result<T> {
    if !(1..=4).contains(&s) {
        return Err(ArchError::domain(format!("tensor power s must be in 1..=4, got {s}")));
    }
    let p = params.p();
    let dim = p
        .checked_pow(s as u32)
        .filter(|&d| d <= MAX_KRON_DIM)
        .ok_or_else(|| ArchError::domain(format!("p^s = {p}^{s} exceeds the tensor dimension cap {MAX_KRON_DIM}")))?;
    if mc_samples == 0 {
        return Err(ArchError::domain("mc_samples must be >= 1"));
    }
    let eps: Vec<T> = sample_innovations_stratified(dist, mc_samples, seed, 0)?;
    let moments = even_moments(&eps, s);
    let op = KronMoment::new(coefficient_row(params.alpha()), shift(p), moments, s);
    if op.is_zero() {
        return Ok(T::zero());
    }
    Ok(spectral_norm_op(dim, |x| op.apply(x, false), |y| op.apply(y, true), T::lit(1e-10), 100_000))
}

/// `m_k = mean(eps^{2k})` for `k = 0..=s`.
fn even_moments<T: Scalar>(eps: &[T], s: usize) -> Vec<T> {
    (0..=s).map(|k| mean(&eps.iter().map(|&e| (e * e).powi(k as i32)).collect::<Vec<_>>())).collect()
}

/// `sum_mask m_|mask| ⊗_i F_i(mask)` as an implicit operator.
struct KronMoment<T> {
    b: Matrix<T>,
    j: Matrix<T>,
    moments: Vec<T>,
    s: usize,
}

impl<T: Scalar> KronMoment<T> {
    fn new(b: Matrix<T>, j: Matrix<T>, moments: Vec<T>, s: usize) -> Self {
        Self { b, j, moments, s }
    }

    fn is_zero(&self) -> bool {
        // J is nilpotent-only for p = 1 (the zero matrix); B vanishes when alpha = 0.
        self.b.max_abs() == T::zero() && self.j.max_abs() == T::zero()
    }

    fn apply(&self, x: &[T], transpose: bool) -> Vec<T> {
        let (b, j) =
            if transpose { (self.b.transpose(), self.j.transpose()) } else { (self.b.clone(), self.j.clone()) };
        let mut out = vec![T::zero(); x.len()];
        for mask in 0..(1usize << self.s) {
            let weight = self.moments[mask.count_ones() as usize];
            let factors: Vec<&Matrix<T>> = (0..self.s).map(|i| if mask >> i & 1 == 1 { &b } else { &j }).collect();
            if factors.iter().any(|f| f.max_abs() == T::zero()) {
                continue;
            }
            let y = kron_apply(&factors, x);
            for (o, v) in out.iter_mut().zip(y) {
                *o = *o + weight * v;
            }
        }
        out
    }
}

/// `(F_1 ⊗ F_2 ⊗ ... ⊗ F_s) x` for square factors of equal size, applied one
/// mode at a time.
pub fn kron_apply<T: Scalar>(factors: &[&Matrix<T>], x: &[T]) -> Vec<T> {
    let p = factors.first().map_or(1, |f| f.nrows());
    let total = x.len();
    let mut cur = x.to_vec();
    let mut stride = total;
    for f in factors {
        stride /= p;
        let block = stride * p;
        let mut next = vec![T::zero(); total];
        for outer in (0..total).step_by(block) {
            for i in 0..p {
                for jj in 0..p {
                    let a = f[(i, jj)];
                    if a == T::zero() {
                        continue;
                    }
                    let dst = outer + i * stride;
                    let src = outer + jj * stride;
                    for inner in 0..stride {
                        next[dst + inner] = next[dst + inner] + a * cur[src + inner];
                    }
                }
            }
        }
        cur = next;
    }
    cur
}

/// Settings for [`stationarity_report`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnosticOptions {
    pub horizon: usize,
    pub reps: usize,
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for DiagnosticOptions {
    fn default() -> Self {
        Self { horizon: 1000, reps: 100, mc_samples: 100_000, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StationarityReport {
    #[serde(rename = "lyapunov")]
    pub lyapunov_estimate: f64,
    #[serde(rename = "lyapunov_se")]
    pub lyapunov_stderr: f64,
    /// `||E[A^{⊗4}]||`, absent when `p^4` exceeds [`MAX_KRON_DIM`].
    pub sigma4_norm: Option<f64>,
    /// Finite eighth moment and `||E[A^{⊗4}]|| < 1`.
    #[serde(rename = "assumption1_ok")]
    pub moment_condition_ok: bool,
    /// Negative top Lyapunov exponent.
    #[serde(rename = "assumption2_ok")]
    pub strict_stationarity_ok: bool,
}

pub fn stationarity_report<T: Scalar>(
    params: &ArchParams<T>,
    dist: &InnovationDist,
    opts: &DiagnosticOptions,
) -> Result<StationarityReport> {
    let (lyap, se) = lyapunov_exponent(params, dist, opts.horizon, opts.reps, opts.seed)?;
    let sigma4 = match sigma_s_norm(params, dist, 4, opts.mc_samples, opts.seed) {
        Ok(v) => Some(v.to_f64_lossy()),
        Err(ArchError::Domain(_)) if params.p().pow(4) > MAX_KRON_DIM => None,
        Err(e) => return Err(e),
    };
    let eighth_finite = dist.eighth_moment().is_ok();
    Ok(StationarityReport {
        lyapunov_estimate: lyap.to_f64_lossy(),
        lyapunov_stderr: se.to_f64_lossy(),
        sigma4_norm: sigma4,
        moment_condition_ok: eighth_finite && sigma4.is_some_and(|v| v < 1.0),
        strict_stationarity_ok: lyap < T::zero(),
    })
}
