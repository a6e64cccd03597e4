//! Influence functions of the LS and EF functionals under additive
//! contamination of the squared data.
//!
//! Write `S_t = (X_t^2, ..., X_{t-p+1}^2)` and contaminate it as
//! `S_t + delta V_t`. The regression for `X_t^2` then has response
//! `S_t^(1) + delta V_t^(1)` and regressor `Z_{t-1} + delta (0, V_{t-1})`.
//! The influence function is the derivative of a functional along `V` at
//! `delta = 0`. All expectations are sample means over `t = p+1..n`.

use serde::{Deserialize, Serialize};

use crate::error::{ArchError, Result};
use crate::estimators::{ef_functional, ls_functional, omega_floor, Design};
use crate::linalg::{dot, Matrix};
use crate::model::Series;
use crate::scalar::Scalar;

/// A contamination direction: one `p`-vector `V_t` per observation, aligned
/// with `S_t = (X_t^2, ..., X_{t-p+1}^2)`. Entries at `t < p - 1` are never
/// read.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contamination<T> {
    pub v: Vec<Vec<T>>,
    #[serde(default)]
    pub description: String,
}

impl<T: Scalar> Contamination<T> {
    pub fn new(v: Vec<Vec<T>>, description: impl Into<String>) -> Self {
        Self { v, description: description.into() }
    }

    pub fn zero(n: usize, p: usize) -> Self {
        Self::new(vec![vec![T::zero(); p]; n], "zero")
    }

    /// `V_k = M e_1`, zero elsewhere: the response at time `k` alone moves.
    pub fn point_mass(n: usize, p: usize, k: usize, m: T) -> Self {
        let mut c = Self::zero(n, p);
        c.v[k][0] = m;
        c.description = format!("point mass {m} at index {k}");
        c
    }

    /// `V = S`, i.e. `S_delta = (1 + delta) S`.
    pub fn self_scaling(series: &Series<T>, p: usize) -> Self {
        let mut c = Self::from_squares(series.x2(), p);
        c.description = "self-contamination".into();
        c
    }

    /// Consistent contamination of the squares: `V_t = (d_t, ..., d_{t-p+1})`,
    /// so that every occurrence of `X_t^2` moves by the same `d_t`.
    pub fn from_squares(d: &[T], p: usize) -> Self {
        let v = (0..d.len()).map(|t| (0..p).map(|j| if t >= j { d[t - j] } else { T::zero() }).collect()).collect();
        Self::new(v, "shift of the squares")
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: T, other: &Self, b: T) -> Self {
        let v = self
            .v
            .iter()
            .zip(&other.v)
            .map(|(x, y)| x.iter().zip(y).map(|(&xi, &yi)| a * xi + b * yi).collect())
            .collect();
        Self::new(v, "linear combination")
    }

    fn check(&self, series: &Series<T>, p: usize) -> Result<()> {
        if self.v.len() != series.len() {
            return Err(ArchError::domain(format!(
                "contamination has {} entries, series has {}",
                self.v.len(),
                series.len()
            )));
        }
        if let Some(t) = self.v.iter().position(|vt| vt.len() != p) {
            return Err(ArchError::domain(format!("contamination entry {t} is not a {p}-vector")));
        }
        if self.v.iter().flatten().any(|x| !x.is_finite()) {
            return Err(ArchError::domain("contamination entries must be finite"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InfluenceResult<T> {
    pub if_ls: Vec<T>,
    /// EF influence in the closed form written for the weighted functional.
    pub if_ef: Option<Vec<T>>,
    /// EF influence by the full chain rule, including the first-step LS
    /// influence carried through the weights.
    pub if_ef_exact: Option<Vec<T>>,
    /// Finite-difference LS influence.
    pub fd_check: Option<Vec<T>>,
    /// Finite-difference EF influence.
    pub fd_check_ef: Option<Vec<T>>,
    pub delta_used: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    Ls,
    Ef,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffScheme {
    /// `(T(S + dV) - T(S - dV)) / 2d`.
    Central,
    /// `(T(S + dV) - T(S)) / d`.
    Forward,
}

/// Row-aligned pieces of the regression and its contamination.
struct Pieces<T> {
    design: Design<T>,
    /// `(0, V_{t-1})` per row.
    v_tilde: Vec<Vec<T>>,
    /// `V_t^(1)` per row.
    v_resp: Vec<T>,
}

impl<T: Scalar> Pieces<T> {
    fn new(series: &Series<T>, c: &Contamination<T>, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(ArchError::domain("order p must be >= 1"));
        }
        if series.len() <= 2 * p + 1 {
            return Err(ArchError::domain(format!("series too short for p = {p}")));
        }
        c.check(series, p)?;
        let design = Design::from_series(series, p);
        let n = series.len();
        let v_tilde = (p..n).map(|t| std::iter::once(T::zero()).chain(c.v[t - 1].iter().copied()).collect()).collect();
        let v_resp = (p..n).map(|t| c.v[t][0]).collect();
        Ok(Self { design, v_tilde, v_resp })
    }

    fn len(&self) -> usize {
        self.design.len()
    }

    fn inv_n(&self) -> T {
        T::one() / T::from_usize_lossy(self.len())
    }

    /// `mean(w_i (Z_i Z_i^T))` and `mean(w_i Z_i S_i)`.
    fn moments(&self, w: impl Fn(usize) -> T) -> (Matrix<T>, Vec<T>) {
        let k = self.design.p() + 1;
        let mut u = Matrix::zeros(k, k);
        let mut g = vec![T::zero(); k];
        for i in 0..self.len() {
            let z = self.design.row(i);
            let wi = w(i);
            u.add_outer(z, z, wi);
            axpy(&mut g, wi * self.design.response()[i], z);
        }
        (u.scale(self.inv_n()), scale(g, self.inv_n()))
    }

    /// `mean(w_i Vt_i Z_i^T)`.
    fn delta(&self, w: impl Fn(usize) -> T) -> Matrix<T> {
        let k = self.design.p() + 1;
        let mut d = Matrix::zeros(k, k);
        for i in 0..self.len() {
            d.add_outer(&self.v_tilde[i], self.design.row(i), w(i));
        }
        d.scale(self.inv_n())
    }

    /// `mean(w_i (Vt_i S_i + Z_i V_i))`.
    fn gamma_dot(&self, w: impl Fn(usize) -> T) -> Vec<T> {
        let mut g = vec![T::zero(); self.design.p() + 1];
        for i in 0..self.len() {
            let wi = w(i);
            axpy(&mut g, wi * self.design.response()[i], &self.v_tilde[i]);
            axpy(&mut g, wi * self.v_resp[i], self.design.row(i));
        }
        scale(g, self.inv_n())
    }

    fn pilot_weights(&self, pilot: &[T], floor: T) -> Result<Vec<T>> {
        // Equal to `Design::variance_weights` but without the rescaling.
        self.design.variance_weights(pilot, floor)
    }
}

fn axpy<T: Scalar>(y: &mut [T], a: T, x: &[T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + a * xi;
    }
}

fn scale<T: Scalar>(v: Vec<T>, k: T) -> Vec<T> {
    v.into_iter().map(|x| x * k).collect()
}

fn sub_vec<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

/// `T_S' = U^{-1} (gamma' - (Delta + Delta^T) T_S)`, the derivative of the
/// unprojected LS functional along `V`.
pub fn influence_ls<T: Scalar>(series: &Series<T>, contamination: &Contamination<T>, p: usize) -> Result<Vec<T>> {
    let pc = Pieces::new(series, contamination, p)?;
    ls_derivative(&pc)
}

fn ls_derivative<T: Scalar>(pc: &Pieces<T>) -> Result<Vec<T>> {
    let (u, g) = pc.moments(|_| T::one());
    let t = u.solve_spd(&g)?;
    let d = pc.delta(|_| T::one());
    let dd = d.add(&d.transpose());
    let rhs = sub_vec(&pc.gamma_dot(|_| T::one()), &dd.matvec(&t));
    u.solve_spd(&rhs)
}

/// EF influence in closed form, with weights `w_t = 1 / (T_S^T Z_t)^2` at the
/// LS functional:
///
/// `T_w' = U_w^{-1} { gamma_w' - [Dt_w + Dt_w^T - (Phi_w + Phi_w^T)] T_w }`,
///
/// where `L_t = S_{t+1}^(1) w_t^2 (T_S^T Vt_t)(Z_t^T T_S)`,
/// `Phi_w = mean(L_t Z_t Z_t^T)`, `Dt_w = mean(w_t Vt_t Z_t^T)` and
/// `gamma_w' = mean(w_t (Vt_t S^(1) + Z_t V^(1))) - 2 mean(L_t Z_t)`.
///
/// This form holds the LS functional fixed inside the weights. See
/// [`influence_ef_exact`] for the complete derivative.
pub fn influence_ef<T: Scalar>(series: &Series<T>, contamination: &Contamination<T>, p: usize) -> Result<Vec<T>> {
    let pc = Pieces::new(series, contamination, p)?;
    let ts = ls_functional(&pc.design)?;
    let w = pc.pilot_weights(&ts, omega_floor(series))?;
    let (uw, gw) = pc.moments(|i| w[i]);
    let tw = uw.solve_spd(&gw)?;
    let k = p + 1;
    let mut phi = Matrix::zeros(k, k);
    let mut lz = vec![T::zero(); k];
    #[allow(clippy::needless_range_loop)]
    for i in 0..pc.len() {
        let z = pc.design.row(i);
        let l = pc.design.response()[i] * w[i] * w[i] * dot(&ts, &pc.v_tilde[i]) * dot(z, &ts);
        phi.add_outer(z, z, l);
        axpy(&mut lz, l, z);
    }
    let phi = phi.scale(pc.inv_n());
    let lz = scale(lz, pc.inv_n());
    let dt = pc.delta(|i| w[i]);
    let gamma_dot = sub_vec(&pc.gamma_dot(|i| w[i]), &scale(lz, T::lit(2.0)));
    let bracket = dt.add(&dt.transpose()).sub(&phi.add(&phi.transpose()));
    uw.solve_spd(&sub_vec(&gamma_dot, &bracket.matvec(&tw)))
}

/// EF influence by the chain rule through both steps: with
/// `w_t = (T_S^T Z_t)^{-2}` and
/// `w_t' = -2 (T_S^T Z_t)^{-3} (T_S'^T Z_t + T_S^T Vt_t)`,
/// `T_w' = U_w^{-1} (gamma_w' - U_w' T_w)` where
/// `U_w' = mean(w (Vt Z^T + Z Vt^T) + w' Z Z^T)` and
/// `gamma_w' = mean(w (V^(1) Z + S^(1) Vt) + w' S^(1) Z)`.
pub fn influence_ef_exact<T: Scalar>(series: &Series<T>, contamination: &Contamination<T>, p: usize) -> Result<Vec<T>> {
    let pc = Pieces::new(series, contamination, p)?;
    let ts = ls_functional(&pc.design)?;
    let ts_dot = ls_derivative(&pc)?;
    let w = pc.pilot_weights(&ts, omega_floor(series))?;
    let (uw, gw) = pc.moments(|i| w[i]);
    let tw = uw.solve_spd(&gw)?;
    let dw: Vec<T> = (0..pc.len())
        .map(|i| {
            let z = pc.design.row(i);
            let s = dot(&ts, z);
            -T::lit(2.0) * (dot(&ts_dot, z) + dot(&ts, &pc.v_tilde[i])) / (s * s * s)
        })
        .collect();
    let dt = pc.delta(|i| w[i]);
    let (du_extra, dg_extra) = pc.moments(|i| dw[i]);
    let du = dt.add(&dt.transpose()).add(&du_extra);
    let dg: Vec<T> = pc.gamma_dot(|i| w[i]).iter().zip(&dg_extra).map(|(&a, &b)| a + b).collect();
    uw.solve_spd(&sub_vec(&dg, &du.matvec(&tw)))
}

/// Finite-difference influence of the refitted functional, central by default.
pub fn influence_fd_oracle<T: Scalar>(
    kind: FitKind,
    series: &Series<T>,
    contamination: &Contamination<T>,
    p: usize,
    delta: T,
) -> Result<Vec<T>> {
    influence_fd(kind, series, contamination, p, delta, DiffScheme::Central)
}

pub fn influence_fd<T: Scalar>(
    kind: FitKind,
    series: &Series<T>,
    contamination: &Contamination<T>,
    p: usize,
    delta: T,
    scheme: DiffScheme,
) -> Result<Vec<T>> {
    if !(delta > T::zero() && delta < T::one()) {
        return Err(ArchError::domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    let pc = Pieces::new(series, contamination, p)?;
    let floor = omega_floor(series);
    let fit = |d: T| -> Result<Vec<T>> {
        let design = contaminated(&pc, d)?;
        let ts = ls_functional(&design)?;
        match kind {
            FitKind::Ls => Ok(ts),
            FitKind::Ef => ef_functional(&design, &ts, floor),
        }
    };
    let plus = fit(delta)?;
    let (minus, width) = match scheme {
        DiffScheme::Central => (fit(-delta)?, delta + delta),
        DiffScheme::Forward => (fit(T::zero())?, delta),
    };
    Ok(plus.iter().zip(&minus).map(|(&a, &b)| (a - b) / width).collect())
}

/// `S + d V` in design form, with every contaminated square floored at 0.
fn contaminated<T: Scalar>(pc: &Pieces<T>, d: T) -> Result<Design<T>> {
    let k = pc.design.p() + 1;
    let rows = Matrix::from_fn(pc.len(), k, |i, j| {
        let z = pc.design.row(i)[j];
        if j == 0 {
            z
        } else {
            (z + d * pc.v_tilde[i][j]).max(T::zero())
        }
    });
    let response = (0..pc.len()).map(|i| (pc.design.response()[i] + d * pc.v_resp[i]).max(T::zero())).collect();
    Design::new(rows, response)
}

/// Both analytic influence functions and the finite-difference checks.
pub fn influence_report<T: Scalar>(
    series: &Series<T>,
    contamination: &Contamination<T>,
    p: usize,
    delta: T,
) -> Result<InfluenceResult<T>> {
    let if_ls = influence_ls(series, contamination, p)?;
    let ef = |r: Result<Vec<T>>| match r {
        Ok(v) => Ok(Some(v)),
        Err(ArchError::DegenerateWeights(_)) => Ok(None),
        Err(e) => Err(e),
    };
    Ok(InfluenceResult {
        if_ef: ef(influence_ef(series, contamination, p))?,
        if_ef_exact: ef(influence_ef_exact(series, contamination, p))?,
        fd_check: Some(influence_fd_oracle(FitKind::Ls, series, contamination, p, delta)?),
        fd_check_ef: ef(influence_fd_oracle(FitKind::Ef, series, contamination, p, delta))?,
        if_ls,
        delta_used: delta,
    })
}
