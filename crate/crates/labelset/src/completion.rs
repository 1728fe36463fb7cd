//! Null-region elimination.
//!
//! A level-set classifier can output the empty set wherever every posterior
//! falls below its class threshold. Three remedies:
//!
//! * [`baseline_fill`]: replace empty predictions with the posterior argmax
//!   singleton.
//! * [`accretive_complete`]: greedily lower one class threshold per step,
//!   always choosing the step with the smallest ambiguity increase, until
//!   the thresholds sum to at most 1 (which guarantees nonempty sets).
//! * [`total_coverage_complete`]: for a single shared threshold, cap it at
//!   `1/K`, the largest value that cannot produce empty sets.

use crate::error::{Error, Result};
use crate::predict::{predict_set, PosteriorModel, PredictionSet};
use crate::threshold::{Threshold, ThresholdVector};

/// An `n x K` table of posterior rows, each a probability simplex.
#[derive(Debug, Clone)]
pub struct PosteriorMatrix {
    values: Vec<f64>,
    n: usize,
    k: usize,
}

impl PosteriorMatrix {
    pub fn new(values: Vec<f64>, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid_argument("need at least two classes"));
        }
        if values.is_empty() || !values.len().is_multiple_of(k) {
            return Err(Error::invalid_argument(format!(
                "{} values do not form rows of width {k}",
                values.len()
            )));
        }
        let n = values.len() / k;
        for row in 0..n {
            crate::estimators::check_simplex(&values[row * k..(row + 1) * k])
                .map_err(|e| Error::invalid_data(format!("row {row}: {e}")))?;
        }
        Ok(PosteriorMatrix { values, n, k })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid_argument("need at least one row"));
        }
        let k = rows[0].len();
        let mut values = Vec::with_capacity(rows.len() * k);
        for row in rows {
            if row.len() != k {
                return Err(Error::invalid_argument("ragged posterior rows"));
            }
            values.extend_from_slice(row);
        }
        PosteriorMatrix::new(values, k)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn class_count(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.k..(i + 1) * self.k]
    }

    /// Column of class `y` (1-based), sorted ascending. Used for fast
    /// `count >= t` queries.
    fn sorted_column(&self, class: usize) -> Vec<f64> {
        let mut col: Vec<f64> = (0..self.n).map(|i| self.row(i)[class - 1]).collect();
        col.sort_by(|a, b| a.partial_cmp(b).expect("finite posteriors"));
        col
    }
}

/// Predict, then fall back to the posterior argmax singleton when the set is
/// empty (ties to the smallest label). The output is never empty.
pub fn baseline_fill<M: PosteriorModel + ?Sized>(
    model: &M,
    thresholds: &ThresholdVector,
    x: &[f64],
) -> Result<PredictionSet> {
    let set = predict_set(model, thresholds, x)?;
    if !set.is_empty() {
        return Ok(set);
    }
    let probs = model.posterior(x)?;
    let mut best = 1usize;
    for y in 2..=probs.len() {
        if probs[y - 1] > probs[best - 1] {
            best = y;
        }
    }
    Ok(PredictionSet::new(vec![best], probs.len()).expect("argmax class is valid"))
}

/// Mean prediction-set size of the level-set rule over the score rows:
/// `(1/n) * sum_i sum_y I\{p(y|X_i) >= t_y\}`, a value in `[0, K]`.
pub fn empirical_ambiguity(scores: &PosteriorMatrix, thresholds: &ThresholdVector) -> Result<f64> {
    let entries = thresholds.entries_for(scores.class_count())?;
    let mut total = 0usize;
    for i in 0..scores.n() {
        let row = scores.row(i);
        total += entries
            .iter()
            .zip(row)
            .filter(|(t, &p)| t.admits(p))
            .count();
    }
    Ok(total as f64 / scores.n() as f64)
}

/// Why the accretive loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    /// The thresholds sum to at most 1; sets are now provably nonempty.
    SumAtMostOne,
    /// No class can be decremented while keeping its threshold positive.
    NoCandidate,
    /// The iteration cap was reached.
    IterationCap,
}

impl TerminationReason {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminationReason::SumAtMostOne => "sum <= 1",
            TerminationReason::NoCandidate => "no candidate",
            TerminationReason::IterationCap => "iteration cap",
        }
    }
}

/// One accepted step of the accretive loop.
#[derive(Debug, Clone, PartialEq)]
pub struct AccretiveStep {
    /// 1-based iteration counter.
    pub iteration: usize,
    /// The class whose threshold was lowered.
    pub chosen_class: usize,
    /// Thresholds after the step.
    pub thresholds: Vec<f64>,
    /// Empirical ambiguity at the new thresholds.
    pub ambiguity: f64,
}

/// Full record of an accretive run.
#[derive(Debug, Clone, PartialEq)]
pub struct AccretiveTrace {
    pub epsilon: f64,
    pub initial: Vec<f64>,
    pub steps: Vec<AccretiveStep>,
    pub termination: TerminationReason,
}

impl AccretiveTrace {
    /// CSV export: `iteration,chosen_class,t_1..t_K,ambiguity,sum_t` with an
    /// iteration-0 row for the initial thresholds.
    pub fn to_csv(&self, initial_ambiguity: f64) -> String {
        let k = self.initial.len();
        let mut out = String::from("iteration,chosen_class");
        for y in 1..=k {
            out.push_str(&format!(",t_{y}"));
        }
        out.push_str(",ambiguity,sum_t\n");
        let row = |iter: usize, class: &str, t: &[f64], amb: f64, out: &mut String| {
            out.push_str(&format!("{iter},{class}"));
            for v in t {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(&format!(",{amb},{}\n", t.iter().sum::<f64>()));
        };
        row(0, "", &self.initial, initial_ambiguity, &mut out);
        for step in &self.steps {
            row(
                step.iteration,
                &step.chosen_class.to_string(),
                &step.thresholds,
                step.ambiguity,
                &mut out,
            );
        }
        out
    }
}

/// Safety-net iteration cap: each class supports at most `ceil(1/epsilon)`
/// decrements before its threshold would go nonpositive.
pub fn default_iteration_cap(k: usize, epsilon: f64) -> usize {
    ((k as f64 / epsilon).ceil() as usize) + k
}

/// The accretive completion loop.
///
/// While the thresholds sum to more than 1, lower one class threshold by
/// `epsilon * t_y(0)`, choosing among classes that stay positive the one
/// whose decrement yields the smallest empirical ambiguity (ties to the
/// smallest class index). Terminates when the sum reaches 1, no candidate
/// remains, or the iteration cap is hit; the reason is recorded in the
/// trace, never raised.
pub fn accretive_complete(
    t0: &ThresholdVector,
    scores: &PosteriorMatrix,
    epsilon: f64,
    iteration_cap: usize,
) -> Result<(ThresholdVector, AccretiveTrace)> {
    let initial: Vec<f64> = match t0 {
        ThresholdVector::Total(_) => {
            return Err(Error::invalid_argument(
                "accretive completion needs class-specific thresholds",
            ))
        }
        ThresholdVector::PerClass(entries) => entries
            .iter()
            .map(|e| match e {
                Threshold::IncludeAll => Err(Error::invalid_argument(
                    "accretive completion cannot start from an INCLUDE_ALL entry",
                )),
                Threshold::Finite(t) if *t > 0.0 => Ok(*t),
                Threshold::Finite(t) => Err(Error::invalid_argument(format!(
                    "accretive completion needs positive thresholds, got {t}"
                ))),
            })
            .collect::<Result<_>>()?,
    };
    let k = initial.len();
    if k != scores.class_count() {
        return Err(Error::invalid_argument(format!(
            "thresholds have {k} classes but the score matrix has {}",
            scores.class_count()
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid_argument(format!(
            "step size must lie strictly in (0, 1), got {epsilon}"
        )));
    }

    // Per-class sorted columns make each candidate evaluation a binary
    // search: only the decremented class's count changes.
    let columns: Vec<Vec<f64>> = (1..=k).map(|y| scores.sorted_column(y)).collect();
    let n = scores.n() as f64;
    let count_ge = |col: &[f64], t: f64| -> usize { col.len() - col.partition_point(|&s| s < t) };

    let mut current = initial.clone();
    let mut counts: Vec<usize> = (0..k).map(|y| count_ge(&columns[y], current[y])).collect();
    let mut steps = Vec::new();
    let mut iteration = 0usize;

    let termination = loop {
        if current.iter().sum::<f64>() <= 1.0 {
            break TerminationReason::SumAtMostOne;
        }
        if iteration >= iteration_cap {
            break TerminationReason::IterationCap;
        }

        let total: usize = counts.iter().sum();
        let mut best: Option<(f64, usize, usize)> = None; // (ambiguity, class, new count)
        for y in 0..k {
            let lowered = current[y] - epsilon * initial[y];
            if lowered <= 0.0 {
                continue;
            }
            let new_count = count_ge(&columns[y], lowered);
            let ambiguity = (total - counts[y] + new_count) as f64 / n;
            // Strict comparison keeps the smallest class index on ties.
            if best.is_none_or(|(a, _, _)| ambiguity < a) {
                best = Some((ambiguity, y, new_count));
            }
        }
        let Some((ambiguity, y, new_count)) = best else {
            break TerminationReason::NoCandidate;
        };

        current[y] -= epsilon * initial[y];
        counts[y] = new_count;
        iteration += 1;
        steps.push(AccretiveStep {
            iteration,
            chosen_class: y + 1,
            thresholds: current.clone(),
            ambiguity,
        });
    };

    let result = ThresholdVector::per_class(current)?;
    Ok((
        result,
        AccretiveTrace {
            epsilon,
            initial,
            steps,
            termination,
        },
    ))
}

/// Single-threshold completion: the largest cut at most `t_alpha` that can
/// never produce an empty set is `min(1/K, t_alpha)`.
pub fn total_coverage_complete(t_alpha: f64, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::invalid_argument("need at least two classes"));
    }
    if !(0.0..=1.0).contains(&t_alpha) || !t_alpha.is_finite() {
        return Err(Error::invalid_argument(format!(
            "threshold must lie in [0, 1], got {t_alpha}"
        )));
    }
    Ok((1.0 / k as f64).min(t_alpha))
}
