//! Gaussian-kernel posterior estimation.
//!
//! Two modes share one model type:
//!
//! * `Regression` uses Nadaraya-Watson weights: `p(y|x)` is the kernel-weighted
//!   fraction of class-`y` training rows.
//! * `ClassConditional` forms a per-class kernel density estimate times the
//!   empirical prior, normalized across classes.
//!
//! Both modes use a product Gaussian kernel with one bandwidth per dimension.
//! When every class uses the same bandwidth vector as the pooled sample, the
//! two modes produce identical posteriors; this is asserted in tests, not
//! assumed anywhere.

use crate::dataset::{Fingerprint, LabeledDataset};
use crate::error::{Error, Result};
use crate::predict::PosteriorModel;

use super::check_query_dim;

const HALF_LN_TAU: f64 = 0.918_938_533_204_672_7; // ln(2*pi)/2

/// Log kernel weights below this are treated as numerically zero; it is the
/// log of the smallest normal positive f64.
const FAR_QUERY_LOG_WEIGHT: f64 = -708.396_418_532_264_1;

/// Bandwidth choice for [`fit_kernel`].
#[derive(Debug, Clone, PartialEq)]
pub enum Bandwidth {
    /// Silverman's rule per dimension. In class-conditional mode the rule is
    /// applied separately within each class (the default pairing).
    Auto,
    /// Silverman's rule on the pooled sample, shared by every class.
    AutoPooled,
    /// Explicit per-dimension bandwidths, shared by every class.
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelMode {
    Regression,
    ClassConditional,
}

/// Resolved bandwidths after fitting.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedBandwidths {
    /// One vector shared by all classes (regression mode, pooled or explicit).
    Shared(Vec<f64>),
    /// One vector per class, indexed by `class - 1`.
    PerClass(Vec<Vec<f64>>),
}

#[derive(Debug, Clone)]
pub struct KernelModel {
    data: LabeledDataset,
    mode: KernelMode,
    bandwidths: FittedBandwidths,
    priors: Vec<f64>,
    fingerprint: Fingerprint,
}

/// Silverman's Gaussian-reference rule for one dimension:
/// `sigma * (4 / (d + 2))^(1/(d+4)) * n^(-1/(d+4))`.
pub fn silverman_bandwidth(sigma: f64, n: usize, dim: usize) -> f64 {
    let d = dim as f64;
    sigma * (4.0 / (d + 2.0)).powf(1.0 / (d + 4.0)) * (n as f64).powf(-1.0 / (d + 4.0))
}

fn sample_std(data: &LabeledDataset, rows: &[usize], col: usize) -> f64 {
    let n = rows.len() as f64;
    let mean: f64 = rows.iter().map(|&i| data.row(i)[col]).sum::<f64>() / n;
    let ss: f64 = rows
        .iter()
        .map(|&i| {
            let z = data.row(i)[col] - mean;
            z * z
        })
        .sum();
    (ss / (n - 1.0)).sqrt()
}

fn silverman_vector(
    data: &LabeledDataset,
    rows: &[usize],
    scope: &str,
) -> Result<Vec<f64>> {
    if rows.len() < 2 {
        return Err(Error::invalid_data(format!(
            "Silverman bandwidth needs at least 2 rows, {scope} has {}",
            rows.len()
        )));
    }
    let d = data.dim();
    let mut out = Vec::with_capacity(d);
    for j in 0..d {
        let sigma = sample_std(data, rows, j);
        if sigma <= 0.0 || !sigma.is_finite() {
            return Err(Error::invalid_data(format!(
                "zero variance in dimension {} ({scope}); supply an explicit bandwidth",
                j + 1
            )));
        }
        out.push(silverman_bandwidth(sigma, rows.len(), d));
    }
    Ok(out)
}

/// Fit a kernel model. `Auto` bandwidths require at least two rows in scope
/// (the whole sample, or each class in class-conditional mode) and positive
/// variance in every dimension.
pub fn fit_kernel(
    data: &LabeledDataset,
    bandwidth: Bandwidth,
    mode: KernelMode,
) -> Result<KernelModel> {
    let all_rows: Vec<usize> = (0..data.n()).collect();
    let bandwidths = match (&bandwidth, mode) {
        (Bandwidth::Explicit(h), _) => {
            if h.len() != data.dim() {
                return Err(Error::invalid_argument(format!(
                    "expected {} bandwidths, got {}",
                    data.dim(),
                    h.len()
                )));
            }
            if let Some(&bad) = h.iter().find(|v| !v.is_finite() || **v <= 0.0) {
                return Err(Error::invalid_argument(format!(
                    "bandwidths must be positive, got {bad}"
                )));
            }
            FittedBandwidths::Shared(h.clone())
        }
        (Bandwidth::AutoPooled, _) | (Bandwidth::Auto, KernelMode::Regression) => {
            FittedBandwidths::Shared(silverman_vector(data, &all_rows, "the sample")?)
        }
        (Bandwidth::Auto, KernelMode::ClassConditional) => {
            let mut per_class = Vec::with_capacity(data.class_count());
            for y in 1..=data.class_count() {
                let rows = data.class_rows(y);
                per_class.push(silverman_vector(data, &rows, &format!("class {y}"))?);
            }
            FittedBandwidths::PerClass(per_class)
        }
    };

    Ok(KernelModel {
        priors: data.class_frequencies(),
        fingerprint: data.fingerprint(),
        data: data.clone(),
        mode,
        bandwidths,
    })
}

impl KernelModel {
    pub fn mode(&self) -> KernelMode {
        self.mode
    }

    pub fn bandwidths(&self) -> &FittedBandwidths {
        &self.bandwidths
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn data(&self) -> &LabeledDataset {
        &self.data
    }

    pub(crate) fn from_parts(
        data: LabeledDataset,
        mode: KernelMode,
        bandwidths: FittedBandwidths,
    ) -> KernelModel {
        KernelModel {
            priors: data.class_frequencies(),
            fingerprint: data.fingerprint(),
            data,
            mode,
            bandwidths,
        }
    }

    fn bandwidth_for_class(&self, class: usize) -> &[f64] {
        match &self.bandwidths {
            FittedBandwidths::Shared(h) => h,
            FittedBandwidths::PerClass(per) => &per[class - 1],
        }
    }

    /// Full log kernel weight of training row `i` at query `x`, including
    /// the normalizing constants (they matter when bandwidths differ).
    fn log_weight(&self, i: usize, x: &[f64], h: &[f64]) -> f64 {
        let row = self.data.row(i);
        let mut acc = 0.0;
        for j in 0..x.len() {
            let z = (x[j] - row[j]) / h[j];
            acc += -0.5 * z * z - h[j].ln() - HALF_LN_TAU;
        }
        acc
    }

    /// Posterior plus a far-query flag. The flag is raised when every kernel
    /// weight underflows, in which case the empirical prior vector is
    /// returned so downstream set prediction stays total.
    pub fn posterior_with_flag(&self, x: &[f64]) -> Result<(Vec<f64>, bool)> {
        check_query_dim(self.data.dim(), x)?;
        let k = self.data.class_count();
        let n = self.data.n();

        match self.mode {
            KernelMode::Regression => {
                let h = self.bandwidth_for_class(1);
                let logw: Vec<f64> = (0..n).map(|i| self.log_weight(i, x, h)).collect();
                let m = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if m < FAR_QUERY_LOG_WEIGHT {
                    return Ok((self.priors.clone(), true));
                }
                let mut num = vec![0.0f64; k];
                let mut den = 0.0f64;
                for (i, lw) in logw.iter().enumerate() {
                    let w = (lw - m).exp();
                    num[self.data.label(i) - 1] += w;
                    den += w;
                }
                Ok((num.into_iter().map(|v| v / den).collect(), false))
            }
            KernelMode::ClassConditional => {
                // Per-class log density: log(1/n_y) + logsumexp of the
                // class's kernel weights under its own bandwidth.
                let counts = self.data.class_counts();
                let mut global_max = f64::NEG_INFINITY;
                let mut scores = vec![f64::NEG_INFINITY; k];
                for y in 1..=k {
                    if counts[y - 1] == 0 {
                        continue; // prior 0, density undefined; class scores -inf
                    }
                    let h = self.bandwidth_for_class(y);
                    let rows = self.data.class_rows(y);
                    let logw: Vec<f64> =
                        rows.iter().map(|&i| self.log_weight(i, x, h)).collect();
                    let m = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    global_max = global_max.max(m);
                    let lse = m + logw.iter().map(|lw| (lw - m).exp()).sum::<f64>().ln();
                    let log_density = lse - (counts[y - 1] as f64).ln();
                    scores[y - 1] = self.priors[y - 1].ln() + log_density;
                }
                if global_max < FAR_QUERY_LOG_WEIGHT {
                    return Ok((self.priors.clone(), true));
                }
                let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
                let den: f64 = exps.iter().sum();
                Ok((exps.into_iter().map(|v| v / den).collect(), false))
            }
        }
    }
}

impl PosteriorModel for KernelModel {
    fn class_count(&self) -> usize {
        self.data.class_count()
    }

    fn feature_dim(&self) -> usize {
        self.data.dim()
    }

    fn posterior(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.posterior_with_flag(x).map(|(p, _)| p)
    }

    fn training_fingerprint(&self) -> Option<Fingerprint> {
        Some(self.fingerprint)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::check_simplex;

    fn data_1d(xs: &[f64], ys: &[usize], k: usize) -> LabeledDataset {
        LabeledDataset::new(xs.to_vec(), 1, ys.to_vec(), k).unwrap()
    }

    #[test]
    fn silverman_matches_independent_formula_evaluation() {
        // sigma = 2, n = 100, d = 1: 2 * (4/3)^(1/5) * 100^(-1/5)
        let expected = 2.0 * (4.0f64 / 3.0).powf(0.2) * 100.0f64.powf(-0.2);
        let h = silverman_bandwidth(2.0, 100, 1);
        assert!((h - expected).abs() < 1e-15);
        assert!((h - 0.8434).abs() < 1e-3, "h = {h}");
    }

    #[test]
    fn auto_bandwidth_matches_sample_std_route() {
        let xs: Vec<f64> = (0..40).map(|i| (i as f64) * 0.37 + ((i * i) % 7) as f64).collect();
        let ys: Vec<usize> = (0..40).map(|i| 1 + i % 2).collect();
        let data = data_1d(&xs, &ys, 2);
        let model = fit_kernel(&data, Bandwidth::Auto, KernelMode::Regression).unwrap();

        let mean = xs.iter().sum::<f64>() / 40.0;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 39.0;
        let expected = silverman_bandwidth(var.sqrt(), 40, 1);
        match model.bandwidths() {
            FittedBandwidths::Shared(h) => assert!((h[0] - expected).abs() < 1e-12),
            _ => panic!("regression mode resolves a shared bandwidth"),
        }
    }

    #[test]
    fn explicit_bandwidth_is_stored_verbatim() {
        let data = LabeledDataset::new(vec![0.0, 0.0, 1.0, 1.0], 2, vec![1, 2], 2).unwrap();
        let model = fit_kernel(
            &data,
            Bandwidth::Explicit(vec![0.5, 0.5]),
            KernelMode::ClassConditional,
        )
        .unwrap();
        assert_eq!(
            model.bandwidths(),
            &FittedBandwidths::Shared(vec![0.5, 0.5])
        );
    }

    #[test]
    fn class_conditional_priors_are_counts() {
        let data = data_1d(&[0.0, 1.0, 10.0, 11.0], &[1, 1, 2, 2], 2);
        let model = fit_kernel(&data, Bandwidth::Auto, KernelMode::ClassConditional).unwrap();
        assert_eq!(model.priors(), &[0.5, 0.5]);
    }

    #[test]
    fn zero_variance_dimension_is_named() {
        let data = LabeledDataset::new(
            vec![1.0, 5.0, 1.0, 6.0, 1.0, 7.0],
            2,
            vec![1, 1, 2],
            2,
        )
        .unwrap();
        let err = fit_kernel(&data, Bandwidth::Auto, KernelMode::Regression).unwrap_err();
        assert!(err.to_string().contains("dimension 1"), "{err}");
    }

    #[test]
    fn auto_bandwidth_needs_two_rows_per_class() {
        let data = data_1d(&[0.0, 1.0, 2.0], &[1, 1, 2], 2);
        let err = fit_kernel(&data, Bandwidth::Auto, KernelMode::ClassConditional).unwrap_err();
        assert!(err.to_string().contains("class 2"), "{err}");
    }

    #[test]
    fn single_point_mass() {
        // One training point in class 1 of 2: probability 1 at any finite query.
        let data = LabeledDataset::new(vec![0.0, 100.0], 1, vec![1, 1], 2);
        // need 2 rows to build a dataset; use both in class 1
        let data = data.unwrap();
        let model = fit_kernel(&data, Bandwidth::Explicit(vec![1.0]), KernelMode::Regression)
            .unwrap();
        for q in [-5.0, 0.0, 50.0] {
            let probs = model.posterior(&[q]).unwrap();
            assert_eq!(probs, vec![1.0, 0.0]);
        }
    }

    #[test]
    fn equidistant_points_with_equal_priors_split_evenly() {
        let data = data_1d(&[-1.0, 1.0], &[1, 2], 2);
        for mode in [KernelMode::Regression, KernelMode::ClassConditional] {
            let model = fit_kernel(&data, Bandwidth::Explicit(vec![1.0]), mode).unwrap();
            let probs = model.posterior(&[0.0]).unwrap();
            assert!((probs[0] - 0.5).abs() < 1e-12, "{mode:?}: {probs:?}");
            assert!((probs[1] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn hand_evaluated_gaussian_weights() {
        // Train x=0 (class 1), x=2 (class 2), h=1, query 0: weights 1 and
        // exp(-2), so p(1|0) = 1 / (1 + exp(-2)).
        let data = data_1d(&[0.0, 2.0], &[1, 2], 2);
        let expected = 1.0 / (1.0 + (-2.0f64).exp());
        for mode in [KernelMode::Regression, KernelMode::ClassConditional] {
            let model = fit_kernel(&data, Bandwidth::Explicit(vec![1.0]), mode).unwrap();
            let probs = model.posterior(&[0.0]).unwrap();
            assert!((probs[0] - expected).abs() < 1e-12, "{mode:?}: {probs:?}");
            assert!((probs[0] - 0.88080).abs() < 1e-5);
        }
    }

    #[test]
    fn far_query_returns_prior_and_flag() {
        let data = data_1d(&[0.0, 0.1, 0.2, 1000.0], &[1, 1, 1, 2], 2);
        let model = fit_kernel(
            &data,
            Bandwidth::Explicit(vec![1e-3]),
            KernelMode::Regression,
        )
        .unwrap();
        let (probs, far) = model.posterior_with_flag(&[500.0]).unwrap();
        assert!(far);
        assert_eq!(probs, vec![0.75, 0.25]);

        let (_, near) = model.posterior_with_flag(&[0.1]).unwrap();
        assert!(!near);
    }

    #[test]
    fn all_labels_equal_gives_constant_one() {
        let data = data_1d(&[0.0, 1.0, 2.0], &[2, 2, 2], 2);
        let model = fit_kernel(&data, Bandwidth::Explicit(vec![0.7]), KernelMode::Regression)
            .unwrap();
        for q in [-2.0, 0.5, 4.0] {
            let probs = model.posterior(&[q]).unwrap();
            assert_eq!(probs, vec![0.0, 1.0]);
        }
    }

    #[test]
    fn modes_agree_under_shared_bandwidth() {
        let xs = vec![0.0, 0.4, 1.1, 2.0, 2.2, 3.5, -0.7, 1.9];
        let ys = vec![1, 1, 2, 2, 3, 3, 1, 2];
        let data = data_1d(&xs, &ys, 3);
        let reg = fit_kernel(&data, Bandwidth::Explicit(vec![0.8]), KernelMode::Regression)
            .unwrap();
        let cc = fit_kernel(
            &data,
            Bandwidth::Explicit(vec![0.8]),
            KernelMode::ClassConditional,
        )
        .unwrap();
        for q in [-1.0, 0.3, 1.5, 2.5, 5.0] {
            let a = reg.posterior(&[q]).unwrap();
            let b = cc.posterior(&[q]).unwrap();
            check_simplex(&a).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12, "q={q}: {a:?} vs {b:?}");
            }
        }
    }
}
