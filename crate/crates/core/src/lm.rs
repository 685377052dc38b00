//! Small dense Levenberg-Marquardt solver.
//!
//! Minimizes ½‖r(x)‖² with the Marquardt scaling JᵀJ + λ·diag(JᵀJ). Bound
//! constraints are handled by projecting each trial point through
//! [`LeastSquares::project`]; a parameter sitting on a bound with the
//! gradient pointing outward is held fixed for that iteration (active set),
//! so the free parameters still converge at the Gauss-Newton rate.
//!
//! The covariance at the solution covers the identifiable parameters only:
//! those held on a bound are treated as fixed (zero variance) and those the
//! residuals do not depend on are reported separately, so one degenerate
//! parameter does not void the error bars of the rest.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub trait LeastSquares {
    fn n_params(&self) -> usize;
    fn n_residuals(&self) -> usize;
    fn residuals(&self, x: &[f64], out: &mut [f64]);

    /// Jacobian ∂rᵢ/∂xⱼ, central differences unless overridden.
    fn jacobian(&self, x: &[f64], jac: &mut DMatrix<f64>) {
        let m = self.n_residuals();
        let mut xp = x.to_vec();
        let mut rp = vec![0.0; m];
        let mut rm = vec![0.0; m];
        for j in 0..x.len() {
            let h = 1e-6 * x[j].abs().max(1e-3);
            xp[j] = x[j] + h;
            self.residuals(&xp, &mut rp);
            xp[j] = x[j] - h;
            self.residuals(&xp, &mut rm);
            xp[j] = x[j];
            for i in 0..m {
                jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
    }

    fn project(&self, _x: &mut [f64]) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Relative cost reduction below which the fit is considered converged.
    pub ftol: f64,
    /// Relative step size below which the fit is considered converged.
    pub xtol: f64,
    /// Infinity norm of the scaled gradient below which the fit is converged.
    pub gtol: f64,
    pub initial_lambda: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iter: 200, ftol: 1e-10, xtol: 1e-10, gtol: 1e-10, initial_lambda: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmReport {
    pub x: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// s²·(JᵀJ)⁻¹ over the free parameters at the solution, with
    /// s² = ‖r‖²/(m − n_free); rows and columns of pinned or unconstrained
    /// parameters are zero. `None` when the free block is singular or there
    /// are no degrees of freedom.
    pub covariance: Option<DMatrix<f64>>,
    /// Parameters held on a bound at the solution.
    pub pinned: Vec<bool>,
    /// Parameters the residuals do not depend on at the solution (zero
    /// Jacobian column); their uncertainty is undefined.
    pub unconstrained: Vec<bool>,
}

impl LmReport {
    pub fn std_errors(&self) -> Option<Vec<f64>> {
        self.covariance.as_ref().map(|c| {
            (0..c.nrows()).map(|i| if self.unconstrained[i] { f64::NAN } else { c[(i, i)].max(0.0).sqrt() }).collect()
        })
    }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

pub fn minimize<P: LeastSquares + ?Sized>(problem: &P, x0: &[f64], opts: &LmOptions) -> LmReport {
    let n = problem.n_params();
    let m = problem.n_residuals();
    assert_eq!(x0.len(), n, "initial guess has wrong length");

    let mut x = x0.to_vec();
    problem.project(&mut x);
    let mut r = vec![0.0; m];
    problem.residuals(&x, &mut r);
    let mut cost = sum_sq(&r);

    let mut jac = DMatrix::zeros(m, n);
    let mut trial = vec![0.0; n];
    let mut r_trial = vec![0.0; m];
    let mut lambda = opts.initial_lambda;
    let mut converged = false;
    let mut iterations = 0;

    if !cost.is_finite() {
        return LmReport {
            x,
            residual_norm: f64::INFINITY,
            iterations,
            converged,
            covariance: None,
            pinned: vec![false; n],
            unconstrained: vec![false; n],
        };
    }

    'outer: while iterations < opts.max_iter {
        iterations += 1;
        problem.jacobian(&x, &mut jac);
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * DVector::from_column_slice(&r);

        let diag: Vec<f64> = (0..n).map(|i| jtj[(i, i)]).collect();
        let dmax = diag.iter().cloned().fold(0.0, f64::max);
        if dmax == 0.0 {
            converged = cost == 0.0;
            break;
        }
        let scale: Vec<f64> = diag.iter().map(|d| d.max(dmax * 1e-15)).collect();

        let active = pinned_on_bound(problem, &x, grad.as_slice(), &scale);
        let gnorm = (0..n).filter(|&i| !active[i]).map(|i| grad[i].abs() / scale[i].sqrt()).fold(0.0, f64::max);
        if gnorm <= opts.gtol * cost.sqrt().max(f64::MIN_POSITIVE) || cost == 0.0 {
            converged = true;
            break;
        }

        loop {
            let mut a = jtj.clone();
            let mut rhs = -&grad;
            for i in 0..n {
                a[(i, i)] += lambda * scale[i];
                if active[i] {
                    a.row_mut(i).fill(0.0);
                    a.column_mut(i).fill(0.0);
                    a[(i, i)] = 1.0;
                    rhs[i] = 0.0;
                }
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&rhs),
                None => {
                    lambda *= 10.0;
                    if lambda > 1e16 {
                        break 'outer;
                    }
                    continue;
                }
            };
            for i in 0..n {
                trial[i] = x[i] + step[i];
            }
            problem.project(&mut trial);
            problem.residuals(&trial, &mut r_trial);
            let new_cost = sum_sq(&r_trial);

            if new_cost.is_finite() && new_cost <= cost {
                let rel_step = (0..n).map(|i| (trial[i] - x[i]).abs() / (x[i].abs() + opts.xtol)).fold(0.0, f64::max);
                let rel_red = (cost - new_cost) / cost.max(f64::MIN_POSITIVE);
                std::mem::swap(&mut x, &mut trial);
                std::mem::swap(&mut r, &mut r_trial);
                cost = new_cost;
                lambda = (lambda / 3.0).max(1e-15);
                if rel_red <= opts.ftol || rel_step <= opts.xtol {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            lambda *= 4.0;
            if lambda > 1e16 {
                // No descent possible from here: at a (local) minimum within
                // numerical precision.
                converged = true;
                break 'outer;
            }
        }
    }

    problem.jacobian(&x, &mut jac);
    let jtj = jac.transpose() * &jac;
    let grad = jac.transpose() * DVector::from_column_slice(&r);
    let dmax = (0..n).map(|i| jtj[(i, i)]).fold(0.0, f64::max);
    let scale: Vec<f64> = (0..n).map(|i| jtj[(i, i)].max(dmax * 1e-15).max(f64::MIN_POSITIVE)).collect();
    let unconstrained: Vec<bool> = (0..n).map(|i| jtj[(i, i)] == 0.0).collect();
    let pinned: Vec<bool> = pinned_on_bound(problem, &x, grad.as_slice(), &scale)
        .into_iter()
        .zip(&unconstrained)
        .map(|(p, u)| p && !u)
        .collect();
    let free: Vec<usize> = (0..n).filter(|&i| !pinned[i] && !unconstrained[i]).collect();
    let covariance = covariance(&jtj, &free, cost, m);
    LmReport { x, residual_norm: cost.sqrt(), iterations, converged, covariance, pinned, unconstrained }
}

/// Projected steepest-descent probe: components that the projection cancels
/// belong to parameters pinned on a bound.
fn pinned_on_bound<P: LeastSquares + ?Sized>(problem: &P, x: &[f64], grad: &[f64], scale: &[f64]) -> Vec<bool> {
    let mut trial: Vec<f64> = (0..x.len()).map(|i| x[i] - grad[i] / scale[i]).collect();
    problem.project(&mut trial);
    (0..x.len()).map(|i| grad[i] != 0.0 && trial[i] == x[i]).collect()
}

fn covariance(jtj: &DMatrix<f64>, free: &[usize], cost: f64, m: usize) -> Option<DMatrix<f64>> {
    let k = free.len();
    if k == 0 || m <= k {
        return None;
    }
    let block = DMatrix::from_fn(k, k, |a, b| jtj[(free[a], free[b])]);
    let svd = block.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin / smax < 1e-13 {
        return None;
    }
    let inv = block.cholesky()?.inverse() * (cost / (m - k) as f64);
    let n = jtj.nrows();
    let mut full = DMatrix::zeros(n, n);
    for (a, &i) in free.iter().enumerate() {
        for (b, &j) in free.iter().enumerate() {
            full[(i, j)] = inv[(a, b)];
        }
    }
    Some(full)
}
