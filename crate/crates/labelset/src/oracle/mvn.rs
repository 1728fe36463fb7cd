//! Minimal dense Cholesky machinery for small multivariate normals.

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct CholeskyFactor {
    dim: usize,
    lower: Vec<f64>, // row-major, upper part unused
}

impl CholeskyFactor {
    /// Factor a row-major `dim x dim` matrix. Fails unless the matrix is
    /// symmetric and positive definite.
    pub(crate) fn new(matrix: &[f64], dim: usize) -> Result<Self> {
        if matrix.len() != dim * dim {
            return Err(Error::invalid_argument(format!(
                "covariance has {} entries, expected {}",
                matrix.len(),
                dim * dim
            )));
        }
        for i in 0..dim {
            for j in 0..i {
                let a = matrix[i * dim + j];
                let b = matrix[j * dim + i];
                if (a - b).abs() > 1e-9 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::invalid_argument(format!(
                        "covariance is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let mut lower = vec![0.0f64; dim * dim];
        for i in 0..dim {
            for j in 0..=i {
                let mut sum = matrix[i * dim + j];
                for t in 0..j {
                    sum -= lower[i * dim + t] * lower[j * dim + t];
                }
                if i == j {
                    if sum <= 0.0 || !sum.is_finite() {
                        return Err(Error::invalid_argument(format!(
                            "covariance is not positive definite (pivot {i})"
                        )));
                    }
                    lower[i * dim + j] = sum.sqrt();
                } else {
                    lower[i * dim + j] = sum / lower[j * dim + j];
                }
            }
        }
        Ok(CholeskyFactor { dim, lower })
    }

    /// Sum of the log diagonal; equals `ln det(Sigma) / 2`.
    pub(crate) fn half_log_det(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.lower[i * self.dim + i].ln())
            .sum()
    }

    /// Solve `L w = rhs` in place (forward substitution).
    #[allow(clippy::needless_range_loop)]
    pub(crate) fn solve_lower(&self, rhs: &mut [f64]) {
        for i in 0..self.dim {
            let mut v = rhs[i];
            for j in 0..i {
                v -= self.lower[i * self.dim + j] * rhs[j];
            }
            rhs[i] = v / self.lower[i * self.dim + i];
        }
    }

    /// `L z`, for turning standard normal draws into correlated ones.
    #[allow(clippy::needless_range_loop)]
    pub(crate) fn mul_lower(&self, z: &[f64], out: &mut [f64]) {
        for i in 0..self.dim {
            let mut v = 0.0;
            for j in 0..=i {
                v += self.lower[i * self.dim + j] * z[j];
            }
            out[i] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_factor_is_identity() {
        let chol = CholeskyFactor::new(&[1.0, 0.0, 0.0, 1.0], 2).unwrap();
        assert_eq!(chol.half_log_det(), 0.0);
        let mut v = [3.0, 4.0];
        chol.solve_lower(&mut v);
        assert_eq!(v, [3.0, 4.0]);
    }

    #[test]
    fn known_factorization() {
        // [[4, 2], [2, 3]] = L L^T with L = [[2, 0], [1, sqrt(2)]].
        let chol = CholeskyFactor::new(&[4.0, 2.0, 2.0, 3.0], 2).unwrap();
        let mut out = [0.0, 0.0];
        chol.mul_lower(&[1.0, 0.0], &mut out);
        assert!((out[0] - 2.0).abs() < 1e-12 && (out[1] - 1.0).abs() < 1e-12);
        chol.mul_lower(&[0.0, 1.0], &mut out);
        assert!(out[0].abs() < 1e-12 && (out[1] - 2.0f64.sqrt()).abs() < 1e-12);
        // det = 8, so half log det = ln(8)/2.
        assert!((chol.half_log_det() - 8.0f64.ln() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_spd_and_asymmetric() {
        assert!(CholeskyFactor::new(&[1.0, 2.0, 2.0, 1.0], 2).is_err()); // indefinite
        assert!(CholeskyFactor::new(&[1.0, 0.5, 0.2, 1.0], 2).is_err()); // asymmetric
        assert!(CholeskyFactor::new(&[0.0], 1).is_err());
    }
}
