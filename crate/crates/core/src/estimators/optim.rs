//! BFGS with a backtracking Armijo line search.

use super::OptimOptions;
use crate::linalg::{dot, Matrix};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct OptimOutcome<T> {
    pub x: Vec<T>,
    pub f: T,
    pub grad: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
}

fn sup_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &a| m.max(a.abs()))
}

/// Minimizes `objective`, which returns the value and gradient at a point.
///
/// Non-finite values are treated as infeasible and rejected by the line
/// search. The returned point is always the best one evaluated.
pub fn bfgs<T, F>(objective: F, x0: Vec<T>, opts: &OptimOptions) -> OptimOutcome<T>
where
    T: Scalar,
    F: Fn(&[T]) -> (T, Vec<T>),
{
    let n = x0.len();
    let grad_tol = T::lit(opts.grad_tol);
    let param_tol = T::lit(opts.param_tol);
    let armijo = T::lit(1e-4);
    let max_step = T::lit(5.0);

    let mut x = x0;
    let (mut f, mut g) = objective(&x);
    let mut h = Matrix::identity(n);
    let mut scaled = false;
    let mut converged = false;
    let mut iterations = 0;

    if !f.is_finite() {
        return OptimOutcome { x, f, grad: g, iterations, converged };
    }

    while iterations < opts.max_iters {
        if sup_norm(&g) <= grad_tol * f.abs().max(T::one()) {
            converged = true;
            break;
        }
        iterations += 1;

        let mut d: Vec<T> = h.matvec(&g).into_iter().map(|v| -v).collect();
        let mut slope = dot(&d, &g);
        if !(slope < T::zero()) {
            h = Matrix::identity(n);
            scaled = false;
            d = g.iter().map(|&v| -v).collect();
            slope = dot(&d, &g);
        }

        let dn = sup_norm(&d);
        let mut step = if dn > max_step { max_step / dn } else { T::one() };
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<T> = x.iter().zip(&d).map(|(&xi, &di)| xi + step * di).collect();
            let (ft, gt) = objective(&trial);
            if ft.is_finite() && ft <= f + armijo * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step = step * T::lit(0.5);
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            // No decrease along a descent direction: we sit at the numerical
            // minimum if the gradient is already small relative to roundoff.
            converged = sup_norm(&g) <= grad_tol.sqrt() * f.abs().max(T::one());
            break;
        };

        let s: Vec<T> = x_new.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = g_new.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let small_step = s.iter().zip(&x_new).all(|(&si, &xi)| si.abs() <= param_tol * (T::one() + xi.abs()));
        x = x_new;
        f = f_new;
        g = g_new;
        if small_step {
            converged = true;
            break;
        }

        let sy = dot(&s, &y);
        let yy = dot(&y, &y);
        if sy > T::epsilon() * (dot(&s, &s) * yy).sqrt() {
            if !scaled {
                h = Matrix::identity(n).scale(sy / yy);
                scaled = true;
            }
            // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
            let rho = T::one() / sy;
            let hy = h.matvec(&y);
            let yhy = dot(&y, &hy);
            let coef = (T::one() + rho * yhy) * rho;
            for i in 0..n {
                for j in 0..n {
                    h[(i, j)] = h[(i, j)] - rho * (s[i] * hy[j] + hy[i] * s[j]) + coef * s[i] * s[j];
                }
            }
        }
    }
    if !converged && sup_norm(&g) <= grad_tol * f.abs().max(T::one()) {
        converged = true;
    }
    OptimOutcome { x, f, grad: g, iterations, converged }
}
