//! Held-out metrics: coverage, ambiguity, null fraction, set-size histogram,
//! and the label co-occurrence matrix.

use crate::error::{Error, Result};
use crate::predict::PredictionSet;

/// Metrics over one batch of predictions.
///
/// `class_coverage[y - 1]` is `None` when no test sample carries class `y`;
/// an explicit marker rather than 0 or NaN so reports aggregate cleanly.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub class_coverage: Vec<Option<f64>>,
    pub total_coverage: f64,
    /// Mean prediction-set size.
    pub ambiguity: f64,
    /// Fraction of empty prediction sets.
    pub null_fraction: f64,
    /// Counts of set sizes 0..=K.
    pub size_histogram: Vec<usize>,
    /// `co_occurrence[k-1][l-1]` counts samples whose set contains both
    /// `k` and `l`; the diagonal counts sets containing `k`.
    pub co_occurrence: Vec<Vec<usize>>,
    pub sample_size: usize,
}

/// Compute the full report. `predictions` and `labels` must align; labels
/// lie in `1..=k`.
pub fn evaluate(
    predictions: &[PredictionSet],
    labels: &[usize],
    k: usize,
) -> Result<EvaluationReport> {
    if predictions.len() != labels.len() {
        return Err(Error::invalid_argument(format!(
            "{} predictions but {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::invalid_argument("nothing to evaluate"));
    }
    if let Some(&y) = labels.iter().find(|&&y| y < 1 || y > k) {
        return Err(Error::invalid_argument(format!("label {y} outside 1..={k}")));
    }

    let n = predictions.len();
    let mut class_total = vec![0usize; k];
    let mut class_hits = vec![0usize; k];
    let mut total_hits = 0usize;
    let mut size_sum = 0usize;
    let mut empties = 0usize;
    let mut co = vec![vec![0usize; k]; k];
    let mut histogram = vec![0usize; k + 1];

    for (set, &label) in predictions.iter().zip(labels) {
        if set.members().iter().any(|&y| y > k) {
            return Err(Error::invalid_argument(format!(
                "prediction set member outside 1..={k}"
            )));
        }
        class_total[label - 1] += 1;
        if set.contains(label) {
            class_hits[label - 1] += 1;
            total_hits += 1;
        }
        size_sum += set.len();
        histogram[set.len()] += 1;
        if set.is_empty() {
            empties += 1;
        }
        for &a in set.members() {
            for &b in set.members() {
                co[a - 1][b - 1] += 1;
            }
        }
    }

    let class_coverage = (0..k)
        .map(|y| {
            if class_total[y] == 0 {
                None
            } else {
                Some(class_hits[y] as f64 / class_total[y] as f64)
            }
        })
        .collect();

    Ok(EvaluationReport {
        class_coverage,
        total_coverage: total_hits as f64 / n as f64,
        ambiguity: size_sum as f64 / n as f64,
        null_fraction: empties as f64 / n as f64,
        size_histogram: histogram,
        co_occurrence: co,
        sample_size: n,
    })
}

/// Counts of prediction-set sizes `0..=k`; sums to the number of sets.
pub fn size_histogram(predictions: &[PredictionSet], k: usize) -> Vec<usize> {
    let mut histogram = vec![0usize; k + 1];
    for set in predictions {
        histogram[set.len().min(k)] += 1;
    }
    histogram
}

/// Quote a CSV field when it contains a delimiter, quote, or line break.
pub fn csv_field(raw: &str) -> String {
    if raw.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw.to_string()
    }
}

impl EvaluationReport {
    pub fn class_count(&self) -> usize {
        self.class_coverage.len()
    }

    /// Machine-readable metrics: `metric,name,value` rows.
    pub fn metrics_csv(&self, class_names: &[String]) -> String {
        let mut out = String::from("metric,name,value\n");
        out.push_str(&format!("sample_size,,{}\n", self.sample_size));
        out.push_str(&format!("total_coverage,,{}\n", self.total_coverage));
        out.push_str(&format!("ambiguity,,{}\n", self.ambiguity));
        out.push_str(&format!("null_fraction,,{}\n", self.null_fraction));
        for (y, cov) in self.class_coverage.iter().enumerate() {
            let value = match cov {
                Some(c) => c.to_string(),
                None => "undefined".to_string(),
            };
            out.push_str(&format!("class_coverage,{},{value}\n", csv_field(&class_names[y])));
        }
        for (size, count) in self.size_histogram.iter().enumerate() {
            out.push_str(&format!("set_size_count,{size},{count}\n"));
        }
        out
    }

    /// Co-occurrence matrix as CSV with a header row of class names.
    pub fn co_occurrence_csv(&self, class_names: &[String]) -> String {
        let mut out = String::from("class");
        for name in class_names {
            out.push_str(&format!(",{}", csv_field(name)));
        }
        out.push('\n');
        for (row, name) in self.co_occurrence.iter().zip(class_names) {
            out.push_str(&csv_field(name));
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }

    /// Human-readable summary table.
    pub fn to_text(&self, class_names: &[String]) -> String {
        let label_width = class_names
            .iter()
            .map(|n| n.len() + 10)
            .max()
            .unwrap_or(0)
            .max(18);
        let mut out = String::new();
        out.push_str(&format!("{:<label_width$} {}\n", "samples", self.sample_size));
        out.push_str(&format!("{:<label_width$} {:.4}\n", "total coverage", self.total_coverage));
        out.push_str(&format!("{:<label_width$} {:.4}\n", "ambiguity", self.ambiguity));
        out.push_str(&format!("{:<label_width$} {:.4}\n", "null fraction", self.null_fraction));
        for (y, cov) in self.class_coverage.iter().enumerate() {
            let label = format!("coverage[{}]", class_names[y]);
            match cov {
                Some(c) => out.push_str(&format!("{label:<label_width$} {c:.4}\n")),
                None => out.push_str(&format!("{label:<label_width$} undefined (no samples)\n")),
            }
        }
        out.push_str(&format!("{:<label_width$} ", "set sizes"));
        let sizes: Vec<String> = self
            .size_histogram
            .iter()
            .enumerate()
            .map(|(s, c)| format!("{s}:{c}"))
            .collect();
        out.push_str(&sizes.join(" "));
        out.push('\n');
        out.push_str("co-occurrence\n");
        for row in &self.co_occurrence {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:>6}")).collect();
            out.push_str(&format!("  {}\n", cells.join(" ")));
        }
        out
    }
}
