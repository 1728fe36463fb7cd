//! Per-class cut-offs and coverage targets.

use crate::error::{Error, Result};

/// A single cut-off. `IncludeAll` compares below every finite score, so the
/// class is admitted no matter how small its posterior; it is needed when
/// conformal calibration cannot certify any finite cut.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    IncludeAll,
    Finite(f64),
}

impl Threshold {
    /// Whether a score passes this cut. Comparison is `>=`: ties at the
    /// threshold are included (closed level set).
    pub fn admits(self, score: f64) -> bool {
        match self {
            Threshold::IncludeAll => true,
            Threshold::Finite(t) => score >= t,
        }
    }

    /// Contribution to the admissibility sum; the sentinel counts as 0.
    pub fn sum_contribution(self) -> f64 {
        match self {
            Threshold::IncludeAll => 0.0,
            Threshold::Finite(t) => t,
        }
    }

    pub fn is_include_all(self) -> bool {
        matches!(self, Threshold::IncludeAll)
    }

    /// Total order with `IncludeAll` below every finite value.
    pub fn cmp_value(self, other: Threshold) -> std::cmp::Ordering {
        use std::cmp::Ordering;
        match (self, other) {
            (Threshold::IncludeAll, Threshold::IncludeAll) => Ordering::Equal,
            (Threshold::IncludeAll, Threshold::Finite(_)) => Ordering::Less,
            (Threshold::Finite(_), Threshold::IncludeAll) => Ordering::Greater,
            (Threshold::Finite(a), Threshold::Finite(b)) => {
                a.partial_cmp(&b).expect("finite thresholds compare")
            }
        }
    }

    fn validate(self) -> Result<()> {
        if let Threshold::Finite(t) = self {
            if !t.is_finite() || !(0.0..=1.0).contains(&t) {
                return Err(Error::invalid_argument(format!(
                    "finite threshold must lie in [0, 1], got {t}"
                )));
            }
        }
        Ok(())
    }
}

/// Coverage mode: one shared cut-off, or one per class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverageMode {
    Total,
    ClassSpecific,
}

/// The cut-offs defining a level-set classifier.
#[derive(Debug, Clone, PartialEq)]
pub enum ThresholdVector {
    /// One threshold applied to every class.
    Total(Threshold),
    /// One threshold per class, indexed by `class - 1`.
    PerClass(Vec<Threshold>),
}

impl ThresholdVector {
    pub fn total(t: f64) -> Result<Self> {
        let entry = Threshold::Finite(t);
        entry.validate()?;
        Ok(ThresholdVector::Total(entry))
    }

    pub fn total_entry(entry: Threshold) -> Result<Self> {
        entry.validate()?;
        Ok(ThresholdVector::Total(entry))
    }

    pub fn per_class(values: Vec<f64>) -> Result<Self> {
        Self::from_entries(values.into_iter().map(Threshold::Finite).collect())
    }

    pub fn from_entries(entries: Vec<Threshold>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid_argument(
                "class-specific thresholds need at least one entry",
            ));
        }
        for entry in &entries {
            entry.validate()?;
        }
        Ok(ThresholdVector::PerClass(entries))
    }

    pub fn mode(&self) -> CoverageMode {
        match self {
            ThresholdVector::Total(_) => CoverageMode::Total,
            ThresholdVector::PerClass(_) => CoverageMode::ClassSpecific,
        }
    }

    /// Number of per-class entries; `None` in total mode (any class count).
    pub fn class_count(&self) -> Option<usize> {
        match self {
            ThresholdVector::Total(_) => None,
            ThresholdVector::PerClass(v) => Some(v.len()),
        }
    }

    /// Cut-off applied to `class` (1-based).
    pub fn entry(&self, class: usize) -> Threshold {
        match self {
            ThresholdVector::Total(t) => *t,
            ThresholdVector::PerClass(v) => v[class - 1],
        }
    }

    /// Expand to one entry per class, for `k` classes.
    pub fn entries_for(&self, k: usize) -> Result<Vec<Threshold>> {
        match self {
            ThresholdVector::Total(t) => Ok(vec![*t; k]),
            ThresholdVector::PerClass(v) => {
                if v.len() != k {
                    return Err(Error::invalid_argument(format!(
                        "threshold vector has {} classes, expected {k}",
                        v.len()
                    )));
                }
                Ok(v.clone())
            }
        }
    }

    /// Sufficient admissibility check: when the per-class thresholds sum to
    /// at most 1 (sentinels counting as 0), every simplex posterior admits at
    /// least one class, because `p(y|x) < t_y` for all `y` would force
    /// `1 = sum_y p(y|x) < sum_y t_y`.
    pub fn is_admissible_sufficient(&self) -> Result<bool> {
        match self {
            ThresholdVector::Total(_) => Err(Error::invalid_argument(
                "admissibility sum check applies to class-specific thresholds",
            )),
            ThresholdVector::PerClass(v) => {
                Ok(v.iter().map(|t| t.sum_contribution()).sum::<f64>() <= 1.0)
            }
        }
    }
}

/// Target error levels: `alpha` for total coverage or one `alpha_y` per class.
#[derive(Debug, Clone, PartialEq)]
pub enum CoverageSpec {
    Total { alpha: f64 },
    ClassSpecific { alphas: Vec<f64> },
}

impl CoverageSpec {
    pub fn total(alpha: f64) -> Result<Self> {
        validate_alpha(alpha)?;
        Ok(CoverageSpec::Total { alpha })
    }

    pub fn class_specific(alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::invalid_argument("need at least one error level"));
        }
        for &a in &alphas {
            validate_alpha(a)?;
        }
        Ok(CoverageSpec::ClassSpecific { alphas })
    }

    pub fn mode(&self) -> CoverageMode {
        match self {
            CoverageSpec::Total { .. } => CoverageMode::Total,
            CoverageSpec::ClassSpecific { .. } => CoverageMode::ClassSpecific,
        }
    }
}

fn validate_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid_argument(format!(
            "error level must lie strictly in (0, 1), got {alpha}"
        )));
    }
    Ok(())
}
