//! Ridge-penalized multinomial logistic regression.
//!
//! The fit minimizes the multinomial negative log-likelihood plus
//! `(lambda/2) * ||theta||^2` with intercepts left unpenalized, using
//! full-batch gradient descent with Armijo backtracking (halving steps from
//! 1.0, sufficient-decrease constant 1e-4). A joint softmax link keeps the
//! outputs on the probability simplex without post-normalization.

use crate::dataset::{Fingerprint, LabeledDataset};
use crate::error::{Error, Result};
use crate::predict::PosteriorModel;

use super::check_query_dim;

pub const DEFAULT_MAX_ITER: usize = 5000;
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

const ARMIJO_C: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;

/// Fit outcome bookkeeping. Non-convergence is recorded here, not raised.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub final_gradient_norm: f64,
    pub converged: bool,
}

/// Multinomial logistic model: a `K x (d+1)` coefficient matrix whose first
/// column is the intercept.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    coef: Vec<f64>,
    class_count: usize,
    dim: usize,
    lambda: f64,
    diagnostics: FitDiagnostics,
    fingerprint: Fingerprint,
}

impl LogisticModel {
    /// Coefficients, row-major `K x (d+1)`; column 0 is the intercept.
    pub fn coefficients(&self) -> &[f64] {
        &self.coef
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn diagnostics(&self) -> FitDiagnostics {
        self.diagnostics
    }

    pub(crate) fn from_parts(
        coef: Vec<f64>,
        class_count: usize,
        dim: usize,
        lambda: f64,
        diagnostics: FitDiagnostics,
        fingerprint: Fingerprint,
    ) -> Result<Self> {
        if coef.len() != class_count * (dim + 1) {
            return Err(Error::invalid_argument(format!(
                "coefficient matrix has {} entries, expected {}",
                coef.len(),
                class_count * (dim + 1)
            )));
        }
        if coef.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid_data("non-finite coefficient"));
        }
        Ok(LogisticModel {
            coef,
            class_count,
            dim,
            lambda,
            diagnostics,
            fingerprint,
        })
    }
}

/// Softmax of `z` with max-subtraction.
fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

fn logits(coef: &[f64], k: usize, width: usize, x: &[f64], out: &mut [f64]) {
    for y in 0..k {
        let row = &coef[y * width..(y + 1) * width];
        let mut z = row[0];
        for j in 0..x.len() {
            z += row[j + 1] * x[j];
        }
        out[y] = z;
    }
}

/// Penalized negative log-likelihood at `coef` (row-major `K x (d+1)`).
pub fn penalized_objective(data: &LabeledDataset, coef: &[f64], lambda: f64) -> f64 {
    let k = data.class_count();
    let width = data.dim() + 1;
    let mut z = vec![0.0; k];
    let mut nll = 0.0;
    for i in 0..data.n() {
        logits(coef, k, width, data.row(i), &mut z);
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        nll += lse - z[data.label(i) - 1];
    }
    let mut penalty = 0.0;
    for y in 0..k {
        for j in 1..width {
            let c = coef[y * width + j];
            penalty += c * c;
        }
    }
    nll + 0.5 * lambda * penalty
}

/// Analytic gradient of [`penalized_objective`], same layout as `coef`.
pub fn penalized_gradient(data: &LabeledDataset, coef: &[f64], lambda: f64) -> Vec<f64> {
    let k = data.class_count();
    let width = data.dim() + 1;
    let mut grad = vec![0.0; k * width];
    let mut p = vec![0.0; k];
    for i in 0..data.n() {
        let x = data.row(i);
        logits(coef, k, width, x, &mut p);
        softmax_in_place(&mut p);
        let label = data.label(i) - 1;
        for y in 0..k {
            let resid = p[y] - if y == label { 1.0 } else { 0.0 };
            let row = &mut grad[y * width..(y + 1) * width];
            row[0] += resid;
            for j in 0..x.len() {
                row[j + 1] += resid * x[j];
            }
        }
    }
    for y in 0..k {
        for j in 1..width {
            grad[y * width + j] += lambda * coef[y * width + j];
        }
    }
    grad
}

/// Fit by gradient descent from zero coefficients. Requires `n >= K` and
/// `lambda >= 0`. Hitting `max_iter` is recorded in the diagnostics and the
/// model is returned anyway.
pub fn fit_logistic(
    data: &LabeledDataset,
    lambda: f64,
    max_iter: usize,
    tolerance: f64,
) -> Result<LogisticModel> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::invalid_argument(format!(
            "ridge penalty must be a nonnegative real, got {lambda}"
        )));
    }
    if data.n() < data.class_count() {
        return Err(Error::invalid_argument(format!(
            "need at least as many rows ({}) as classes ({})",
            data.n(),
            data.class_count()
        )));
    }
    if !tolerance.is_finite() || tolerance <= 0.0 {
        return Err(Error::invalid_argument("tolerance must be positive"));
    }

    let k = data.class_count();
    let width = data.dim() + 1;
    let mut coef = vec![0.0f64; k * width];
    let mut objective = penalized_objective(data, &coef, lambda);
    let mut iterations = 0;
    let mut grad_inf = f64::INFINITY;
    let mut converged = false;

    while iterations < max_iter {
        let grad = penalized_gradient(data, &coef, lambda);
        grad_inf = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if grad_inf < tolerance {
            converged = true;
            break;
        }
        let grad_sq: f64 = grad.iter().map(|g| g * g).sum();

        let mut step = 1.0;
        let mut candidate = vec![0.0; coef.len()];
        loop {
            for (c, (&base, &g)) in candidate.iter_mut().zip(coef.iter().zip(&grad)) {
                *c = base - step * g;
            }
            let trial = penalized_objective(data, &candidate, lambda);
            if trial <= objective - ARMIJO_C * step * grad_sq {
                objective = trial;
                break;
            }
            step *= 0.5;
            if step < MIN_STEP {
                break;
            }
        }
        if step < MIN_STEP {
            // Line search stalled; the gradient norm below records how close
            // we got.
            break;
        }
        std::mem::swap(&mut coef, &mut candidate);
        iterations += 1;
    }
    if !converged && iterations <= max_iter {
        let grad = penalized_gradient(data, &coef, lambda);
        grad_inf = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        converged = grad_inf < tolerance;
    }

    LogisticModel::from_parts(
        coef,
        k,
        data.dim(),
        lambda,
        FitDiagnostics {
            iterations,
            final_gradient_norm: grad_inf,
            converged,
        },
        data.fingerprint(),
    )
}

impl PosteriorModel for LogisticModel {
    fn class_count(&self) -> usize {
        self.class_count
    }

    fn feature_dim(&self) -> usize {
        self.dim
    }

    fn posterior(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_query_dim(self.dim, x)?;
        let mut z = vec![0.0; self.class_count];
        logits(&self.coef, self.class_count, self.dim + 1, x, &mut z);
        softmax_in_place(&mut z);
        Ok(z)
    }

    fn training_fingerprint(&self) -> Option<Fingerprint> {
        Some(self.fingerprint)
    }
}
