//! Plug-in estimators of the class-posterior probabilities.

mod kernel;
mod knn;
mod logistic;

pub use kernel::{fit_kernel, Bandwidth, FittedBandwidths, KernelMode, KernelModel};
pub use knn::{fit_knn, KnnModel};
pub use logistic::{
    fit_logistic, penalized_gradient, penalized_objective, FitDiagnostics, LogisticModel,
    DEFAULT_MAX_ITER, DEFAULT_TOLERANCE,
};

use crate::error::{Error, Result};

/// Absolute tolerance for simplex checks on posterior vectors.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Verify that `probs` is a valid probability vector.
pub fn check_simplex(probs: &[f64]) -> Result<()> {
    let mut sum = 0.0;
    for &p in probs {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::invalid_data(format!(
                "posterior entry {p} is not a probability"
            )));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(Error::invalid_data(format!(
            "posterior entries sum to {sum}, expected 1"
        )));
    }
    Ok(())
}

pub(crate) fn check_query_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::invalid_argument(format!(
            "query has {} dimensions, model expects {expected}",
            x.len()
        )));
    }
    Ok(())
}
