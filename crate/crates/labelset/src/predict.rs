//! The level-set prediction rule and the model capability it consumes.

use crate::dataset::{Fingerprint, LabeledDataset};
use crate::error::{Error, Result};
use crate::threshold::ThresholdVector;

/// Anything mapping a feature vector to a probability simplex over K classes.
///
/// Implementations must be deterministic: identical inputs yield identical
/// outputs. Returned vectors have nonnegative entries summing to 1 within
/// 1e-9.
pub trait PosteriorModel {
    fn class_count(&self) -> usize;

    fn feature_dim(&self) -> usize;

    /// Class-posterior estimates at `x`, one entry per class.
    fn posterior(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Digest of the training rows, when the model was fitted from data.
    /// Used to enforce that split-conformal calibration never scores rows
    /// the model has seen.
    fn training_fingerprint(&self) -> Option<Fingerprint> {
        None
    }
}

/// A subset of `{1..K}`, sorted ascending. May be empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PredictionSet {
    members: Vec<usize>,
}

impl PredictionSet {
    pub fn empty() -> Self {
        PredictionSet { members: Vec::new() }
    }

    /// Validating constructor: members must be distinct and lie in `1..=k`.
    pub fn new(mut members: Vec<usize>, k: usize) -> Result<Self> {
        members.sort_unstable();
        for window in members.windows(2) {
            if window[0] == window[1] {
                return Err(Error::invalid_argument(format!(
                    "duplicate member {}",
                    window[0]
                )));
            }
        }
        if let Some(&y) = members.iter().find(|&&y| y < 1 || y > k) {
            return Err(Error::invalid_argument(format!(
                "member {y} outside 1..={k}"
            )));
        }
        Ok(PredictionSet { members })
    }

    pub(crate) fn from_sorted(members: Vec<usize>) -> Self {
        debug_assert!(members.windows(2).all(|w| w[0] < w[1]));
        PredictionSet { members }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, class: usize) -> bool {
        self.members.binary_search(&class).is_ok()
    }

    /// Bit `class - 1` set per member. Supports up to 128 classes.
    pub fn bitmask(&self) -> u128 {
        let mut mask = 0u128;
        for &y in &self.members {
            assert!(y <= 128, "bitmask supports at most 128 classes");
            mask |= 1u128 << (y - 1);
        }
        mask
    }
}

/// The level-set rule: every class whose posterior clears its cut-off.
///
/// Inclusion uses `>=`, so ties at the threshold are kept, and `IncludeAll`
/// entries are always satisfied.
pub fn predict_set<M: PosteriorModel + ?Sized>(
    model: &M,
    thresholds: &ThresholdVector,
    x: &[f64],
) -> Result<PredictionSet> {
    let k = model.class_count();
    if let Some(tk) = thresholds.class_count() {
        if tk != k {
            return Err(Error::invalid_argument(format!(
                "threshold vector has {tk} classes but the model has {k}"
            )));
        }
    }
    let probs = model.posterior(x)?;
    let members = (1..=k)
        .filter(|&y| thresholds.entry(y).admits(probs[y - 1]))
        .collect();
    Ok(PredictionSet::from_sorted(members))
}

/// Posterior rows for a batch of dataset rows (all rows, or a subset).
pub fn posterior_rows<M: PosteriorModel + ?Sized>(
    model: &M,
    data: &LabeledDataset,
    indices: Option<&[usize]>,
) -> Result<Vec<Vec<f64>>> {
    match indices {
        None => (0..data.n()).map(|i| model.posterior(data.row(i))).collect(),
        Some(idx) => idx.iter().map(|&i| model.posterior(data.row(i))).collect(),
    }
}

/// A fixed posterior table; handy as a stand-in model in tests and for
/// calibrating against precomputed scores.
#[derive(Debug, Clone)]
pub struct TablePosterior {
    rows: Vec<Vec<f64>>,
    dim: usize,
}

impl TablePosterior {
    /// `rows[i]` is returned for the query `[i as f64]` (nearest index).
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid_argument("table must have at least one row"));
        }
        let k = rows[0].len();
        for row in &rows {
            if row.len() != k {
                return Err(Error::invalid_argument("ragged posterior table"));
            }
            crate::estimators::check_simplex(row)?;
        }
        Ok(TablePosterior { rows, dim: 1 })
    }
}

impl PosteriorModel for TablePosterior {
    fn class_count(&self) -> usize {
        self.rows[0].len()
    }

    fn feature_dim(&self) -> usize {
        self.dim
    }

    fn posterior(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::invalid_argument(format!(
                "query has {} dims, expected {}",
                x.len(),
                self.dim
            )));
        }
        let i = (x[0].round().max(0.0) as usize).min(self.rows.len() - 1);
        Ok(self.rows[i].clone())
    }
}
