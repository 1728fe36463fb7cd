//! Labeled samples and reproducible fit/calibration splits.

use crate::error::{Error, Result};
use crate::rng;
use rand::Rng;

/// A 64-bit digest of a dataset's exact contents (shape, labels, feature
/// bits). Used to verify that a model was fitted on the rows it claims.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fingerprint(pub u64);

impl std::fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl Fingerprint {
    /// Parse the 16-hex-digit form produced by `Display`.
    pub fn parse(text: &str) -> Option<Self> {
        u64::from_str_radix(text.trim(), 16).ok().map(Fingerprint)
    }
}

/// A feature matrix with integer labels in `1..=K`.
///
/// Rows are stored contiguously; labels are 1-based everywhere in the public
/// API. A class index may appear zero times (e.g. after splitting), which is
/// why the class count is explicit rather than inferred.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    n: usize,
    dim: usize,
    class_count: usize,
}

impl LabeledDataset {
    /// Build a dataset from a row-major feature buffer of `labels.len() * dim`
    /// entries. All features must be finite and labels must lie in `1..=k`.
    pub fn new(features: Vec<f64>, dim: usize, labels: Vec<usize>, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid_argument(format!(
                "class count must be at least 2, got {k}"
            )));
        }
        if dim == 0 {
            return Err(Error::invalid_argument("feature dimension must be positive"));
        }
        let n = labels.len();
        if n == 0 {
            return Err(Error::invalid_argument("dataset must contain at least one row"));
        }
        if features.len() != n * dim {
            return Err(Error::invalid_argument(format!(
                "feature buffer has {} entries, expected {} ({} rows x {} dims)",
                features.len(),
                n * dim,
                n,
                dim
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid_data(format!(
                "non-finite feature at row {}, column {}",
                pos / dim + 1,
                pos % dim + 1
            )));
        }
        for (i, &y) in labels.iter().enumerate() {
            if y < 1 || y > k {
                return Err(Error::invalid_data(format!(
                    "label {y} at row {} outside 1..={k}",
                    i + 1
                )));
            }
        }
        Ok(LabeledDataset {
            features,
            labels,
            n,
            dim,
            class_count: k,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    /// Label of row `i`, in `1..=K`.
    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Number of rows per class, indexed by `class - 1`.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.class_count];
        for &y in &self.labels {
            counts[y - 1] += 1;
        }
        counts
    }

    /// Empirical class frequencies; sums to 1.
    pub fn class_frequencies(&self) -> Vec<f64> {
        self.class_counts()
            .into_iter()
            .map(|c| c as f64 / self.n as f64)
            .collect()
    }

    /// Row indices belonging to `class`.
    pub fn class_rows(&self, class: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.labels[i] == class).collect()
    }

    /// New dataset holding the given rows, in the given order. The class
    /// count carries over even when some classes vanish from the subset.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::invalid_argument("subset must select at least one row"));
        }
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.n {
                return Err(Error::invalid_argument(format!(
                    "row index {i} out of range for {} rows",
                    self.n
                )));
            }
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        LabeledDataset::new(features, self.dim, labels, self.class_count)
    }

    /// Digest over shape, labels, and the exact feature bit patterns.
    pub fn fingerprint(&self) -> Fingerprint {
        let mut hash = 0xcbf2_9ce4_8422_2325u64;
        let mut feed = |word: u64| {
            for byte in word.to_le_bytes() {
                hash ^= u64::from(byte);
                hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        feed(self.n as u64);
        feed(self.dim as u64);
        feed(self.class_count as u64);
        for &y in &self.labels {
            feed(y as u64);
        }
        for &v in &self.features {
            feed(v.to_bits());
        }
        Fingerprint(hash)
    }
}

/// Disjoint fit/calibration index sets derived from a seeded permutation,
/// with the calibration half partitioned by class.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    seed: u64,
    fraction: f64,
    fit: Vec<usize>,
    calibration: Vec<usize>,
    per_class: Vec<Vec<usize>>,
}

impl SplitPlan {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fraction(&self) -> f64 {
        self.fraction
    }

    /// Fit indices, ascending.
    pub fn fit(&self) -> &[usize] {
        &self.fit
    }

    /// Calibration indices, ascending.
    pub fn calibration(&self) -> &[usize] {
        &self.calibration
    }

    /// Calibration indices of `class`, ascending.
    pub fn calibration_for_class(&self, class: usize) -> &[usize] {
        &self.per_class[class - 1]
    }

    /// Classes with no calibration rows. Permitted by `split`, but
    /// class-specific calibration will reject such plans later.
    pub fn missing_calibration_classes(&self) -> Vec<usize> {
        (1..=self.per_class.len())
            .filter(|&y| self.per_class[y - 1].is_empty())
            .collect()
    }
}

/// Partition rows into a fit set of `round(fraction * n)` rows and a
/// calibration set, via a seeded uniformly random permutation.
pub fn split(data: &LabeledDataset, seed: u64, fraction: f64) -> Result<SplitPlan> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid_argument(format!(
            "split fraction must lie strictly in (0, 1), got {fraction}"
        )));
    }
    let n = data.n();
    if n < 2 {
        return Err(Error::invalid_argument(
            "splitting requires at least two rows",
        ));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng::stream(seed, "split", 0, 0);
    // Fisher-Yates, spelled out so the draw sequence is pinned down.
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }

    let fit_size = (fraction * n as f64).round() as usize;
    let mut fit: Vec<usize> = order[..fit_size].to_vec();
    let mut calibration: Vec<usize> = order[fit_size..].to_vec();
    fit.sort_unstable();
    calibration.sort_unstable();

    let mut per_class = vec![Vec::new(); data.class_count()];
    for &i in &calibration {
        per_class[data.label(i) - 1].push(i);
    }

    Ok(SplitPlan {
        seed,
        fraction,
        fit,
        calibration,
        per_class,
    })
}
