//! k-nearest-neighbor posterior estimation.

use crate::dataset::{Fingerprint, LabeledDataset};
use crate::error::{Error, Result};
use crate::predict::PosteriorModel;

use super::check_query_dim;

/// k-NN posterior model over Euclidean distance.
///
/// Exactly `k` neighbors are counted, with distance ties broken by training
/// row index, so every posterior entry is a multiple of `1/k`.
#[derive(Debug, Clone)]
pub struct KnnModel {
    data: LabeledDataset,
    k: usize,
    fingerprint: Fingerprint,
}

/// Store the training data and validate `1 <= k <= n`.
pub fn fit_knn(data: &LabeledDataset, k: usize) -> Result<KnnModel> {
    if k < 1 || k > data.n() {
        return Err(Error::invalid_argument(format!(
            "k must lie in 1..={}, got {k}",
            data.n()
        )));
    }
    Ok(KnnModel {
        fingerprint: data.fingerprint(),
        data: data.clone(),
        k,
    })
}

impl KnnModel {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn data(&self) -> &LabeledDataset {
        &self.data
    }
}

impl PosteriorModel for KnnModel {
    fn class_count(&self) -> usize {
        self.data.class_count()
    }

    fn feature_dim(&self) -> usize {
        self.data.dim()
    }

    fn posterior(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_query_dim(self.data.dim(), x)?;
        let n = self.data.n();

        // Squared distances preserve the neighbor order; (distance, index) is
        // a total order, so the selected k rows are unambiguous under ties.
        let mut order: Vec<(f64, usize)> = (0..n)
            .map(|i| {
                let d2: f64 = self
                    .data
                    .row(i)
                    .iter()
                    .zip(x)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (d2, i)
            })
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| {
            a.0.partial_cmp(&b.0)
                .expect("finite distances")
                .then(a.1.cmp(&b.1))
        };
        if self.k < n {
            order.select_nth_unstable_by(self.k - 1, cmp);
        }

        let mut counts = vec![0usize; self.data.class_count()];
        for &(_, i) in &order[..self.k] {
            counts[self.data.label(i) - 1] += 1;
        }
        Ok(counts
            .into_iter()
            .map(|c| c as f64 / self.k as f64)
            .collect())
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
    fn k_bounds_are_enforced() {
        let data = data_1d(&[0.0, 1.0, 2.0], &[1, 1, 2], 2);
        assert!(fit_knn(&data, 0).is_err());
        assert!(fit_knn(&data, 4).is_err());
        assert!(fit_knn(&data, 1).is_ok());
        assert!(fit_knn(&data, 3).is_ok());
    }

    #[test]
    fn single_neighbor_is_certain() {
        let data = LabeledDataset::new(vec![0.0, 5.0], 1, vec![1, 2], 2).unwrap();
        let model = fit_knn(&data, 1).unwrap();
        assert_eq!(model.posterior(&[0.0]).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn hand_counted_three_neighbors() {
        // Labels among the 3 nearest of query 0 are (1, 1, 2).
        let data = data_1d(&[0.0, 1.0, 2.0], &[1, 1, 2], 2);
        let model = fit_knn(&data, 3).unwrap();
        let probs = model.posterior(&[0.0]).unwrap();
        assert!((probs[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((probs[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn k_equal_n_returns_class_frequencies() {
        let data = data_1d(&[0.0, 1.0, 2.0, 3.0, 9.0], &[1, 2, 2, 2, 1], 2);
        let model = fit_knn(&data, 5).unwrap();
        for q in [-3.0, 0.5, 100.0] {
            assert_eq!(model.posterior(&[q]).unwrap(), data.class_frequencies());
        }
    }

    #[test]
    fn distance_ties_break_by_row_index() {
        // Three points at the same location; k = 2 must pick rows 0 and 1.
        let data = data_1d(&[1.0, 1.0, 1.0], &[1, 1, 2], 2);
        let model = fit_knn(&data, 2).unwrap();
        assert_eq!(model.posterior(&[1.0]).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn outputs_are_simplex_multiples_of_one_over_k() {
        let data = data_1d(&[0.0, 0.5, 1.5, 2.0, 4.0, 4.5], &[1, 2, 3, 1, 2, 3], 3);
        let model = fit_knn(&data, 4).unwrap();
        for q in [-1.0, 0.7, 3.0, 10.0] {
            let probs = model.posterior(&[q]).unwrap();
            check_simplex(&probs).unwrap();
            for p in probs {
                let scaled = p * 4.0;
                assert!((scaled - scaled.round()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let data = data_1d(&[0.0, 1.0], &[1, 2], 2);
        let model = fit_knn(&data, 1).unwrap();
        assert!(model.posterior(&[0.0, 1.0]).is_err());
    }
}
