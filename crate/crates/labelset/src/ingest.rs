//! CSV ingestion.
//!
//! Expected layout: a header row, one label column selected by name, and
//! numeric feature columns for everything else (UTF-8, `.` as the decimal
//! point). Rows with non-numeric or non-finite features are rejected with
//! their file line number.
//!
//! Label values are treated as opaque strings and mapped to `1..=K`
//! deterministically: numerically when every distinct label parses as an
//! integer, lexicographically otherwise.

use std::collections::BTreeSet;
use std::path::Path;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

/// A parsed dataset plus the name metadata needed to interpret it.
#[derive(Debug, Clone)]
pub struct CsvDataset {
    pub dataset: LabeledDataset,
    /// Class names in label order: `class_names[y - 1]` is class `y`.
    pub class_names: Vec<String>,
    /// Feature column names, in column order.
    pub feature_names: Vec<String>,
}

/// Read a labeled dataset from a CSV file.
pub fn read_labeled_csv(path: &Path, label_col: &str) -> Result<CsvDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_labeled_csv(file, label_col, None)
}

/// Read a labeled dataset whose labels must come from a known class list
/// (e.g. the classes a model was fitted on). Unknown labels are rejected.
pub fn read_labeled_csv_with_classes(
    path: &Path,
    label_col: &str,
    class_names: &[String],
) -> Result<CsvDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_labeled_csv(file, label_col, Some(class_names))
}

/// Parse a labeled dataset from any reader. See [`read_labeled_csv`].
pub fn parse_labeled_csv(
    reader: impl std::io::Read,
    label_col: &str,
    forced_classes: Option<&[String]>,
) -> Result<CsvDataset> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = csv
        .headers()
        .map_err(|e| Error::invalid_data(format!("cannot read CSV header: {e}")))?
        .clone();

    let label_idx = headers
        .iter()
        .position(|h| h == label_col)
        .ok_or_else(|| {
            Error::invalid_data(format!(
                "label column {label_col:?} not found; header has: {}",
                headers.iter().collect::<Vec<_>>().join(", ")
            ))
        })?;

    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();
    let dim = feature_names.len();
    if dim == 0 {
        return Err(Error::invalid_data(
            "CSV has no feature columns besides the label column",
        ));
    }

    let mut features: Vec<f64> = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    for record in csv.records() {
        let record = record.map_err(|e| {
            let line = e
                .position()
                .map(|p| p.line().to_string())
                .unwrap_or_else(|| "?".to_string());
            Error::invalid_data(format!("CSV parse error at line {line}: {e}"))
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != headers.len() {
            return Err(Error::invalid_data(format!(
                "line {line}: expected {} fields, found {}",
                headers.len(),
                record.len()
            )));
        }
        for (col, field) in record.iter().enumerate() {
            if col == label_idx {
                let label = field.trim();
                // Labels feed line-based artifacts and report headers.
                if label.contains('\n') || label.contains('\r') {
                    return Err(Error::invalid_data(format!(
                        "line {line}: label value contains a line break"
                    )));
                }
                raw_labels.push(label.to_string());
                continue;
            }
            let value: f64 = field.trim().parse().map_err(|_| {
                Error::invalid_data(format!(
                    "line {line}: non-numeric feature {:?} in column {:?}",
                    field, &headers[col]
                ))
            })?;
            if !value.is_finite() {
                return Err(Error::invalid_data(format!(
                    "line {line}: non-finite feature {value} in column {:?}",
                    &headers[col]
                )));
            }
            features.push(value);
        }
    }

    if raw_labels.is_empty() {
        return Err(Error::invalid_data("CSV contains no data rows"));
    }

    let class_names: Vec<String> = match forced_classes {
        Some(names) => names.to_vec(),
        None => order_classes(&raw_labels),
    };
    if class_names.len() < 2 {
        return Err(Error::invalid_data(format!(
            "need at least 2 distinct classes, found {}",
            class_names.len()
        )));
    }

    let labels: Vec<usize> = raw_labels
        .iter()
        .map(|raw| {
            class_names
                .iter()
                .position(|c| c == raw)
                .map(|i| i + 1)
                .ok_or_else(|| Error::invalid_data(format!("unknown class label {raw:?}")))
        })
        .collect::<Result<_>>()?;

    let dataset = LabeledDataset::new(features, dim, labels, class_names.len())?;
    Ok(CsvDataset {
        dataset,
        class_names,
        feature_names,
    })
}

/// Read feature rows only, optionally dropping one named column (typically
/// the label column of a file that carries one).
pub fn read_features_csv(path: &Path, drop_col: Option<&str>) -> Result<FeatureRows> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_features_csv(file, drop_col)
}

/// Feature-only rows, row-major.
#[derive(Debug, Clone)]
pub struct FeatureRows {
    pub values: Vec<f64>,
    pub n: usize,
    pub dim: usize,
    pub feature_names: Vec<String>,
}

impl FeatureRows {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }
}

/// Parse feature rows from any reader. See [`read_features_csv`].
pub fn parse_features_csv(
    reader: impl std::io::Read,
    drop_col: Option<&str>,
) -> Result<FeatureRows> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = csv
        .headers()
        .map_err(|e| Error::invalid_data(format!("cannot read CSV header: {e}")))?
        .clone();

    let drop_idx = match drop_col {
        Some(name) => Some(headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::invalid_data(format!("column {name:?} not found in CSV header"))
        })?),
        None => None,
    };

    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != drop_idx)
        .map(|(_, h)| h.to_string())
        .collect();
    let dim = feature_names.len();
    if dim == 0 {
        return Err(Error::invalid_data("CSV has no feature columns"));
    }

    let mut values: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for record in csv.records() {
        let record = record.map_err(|e| {
            let line = e
                .position()
                .map(|p| p.line().to_string())
                .unwrap_or_else(|| "?".to_string());
            Error::invalid_data(format!("CSV parse error at line {line}: {e}"))
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != headers.len() {
            return Err(Error::invalid_data(format!(
                "line {line}: expected {} fields, found {}",
                headers.len(),
                record.len()
            )));
        }
        for (col, field) in record.iter().enumerate() {
            if Some(col) == drop_idx {
                continue;
            }
            let value: f64 = field.trim().parse().map_err(|_| {
                Error::invalid_data(format!(
                    "line {line}: non-numeric feature {:?} in column {:?}",
                    field, &headers[col]
                ))
            })?;
            if !value.is_finite() {
                return Err(Error::invalid_data(format!(
                    "line {line}: non-finite feature {value} in column {:?}",
                    &headers[col]
                )));
            }
            values.push(value);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::invalid_data("CSV contains no data rows"));
    }

    Ok(FeatureRows {
        values,
        n,
        dim,
        feature_names,
    })
}

/// Distinct labels in deterministic order: numeric when every label parses
/// as an integer, lexicographic otherwise.
fn order_classes(raw_labels: &[String]) -> Vec<String> {
    let distinct: BTreeSet<&String> = raw_labels.iter().collect();
    let mut names: Vec<String> = distinct.into_iter().cloned().collect();
    let numeric: Option<Vec<i64>> = names.iter().map(|s| s.parse::<i64>().ok()).collect();
    if let Some(keys) = numeric {
        let mut pairs: Vec<(i64, String)> = keys.into_iter().zip(names).collect();
        pairs.sort();
        names = pairs.into_iter().map(|(_, s)| s).collect();
    }
    names
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_basic_csv() {
        let text = "sepal,petal,species\n1.0,2.0,virginica\n3.0,4.0,setosa\n5.0,6.0,setosa\n";
        let parsed = parse_labeled_csv(text.as_bytes(), "species", None).unwrap();
        assert_eq!(parsed.class_names, vec!["setosa", "virginica"]);
        assert_eq!(parsed.feature_names, vec!["sepal", "petal"]);
        assert_eq!(parsed.dataset.labels(), &[2, 1, 1]);
        assert_eq!(parsed.dataset.row(0), &[1.0, 2.0]);
    }

    #[test]
    fn label_column_position_is_flexible() {
        let text = "y,a,b\n1,0.5,0.25\n2,1.5,2.5\n";
        let parsed = parse_labeled_csv(text.as_bytes(), "y", None).unwrap();
        assert_eq!(parsed.dataset.dim(), 2);
        assert_eq!(parsed.dataset.labels(), &[1, 2]);
    }

    #[test]
    fn numeric_labels_sort_numerically() {
        let text = "x,y\n0.0,10\n0.0,9\n0.0,2\n";
        let parsed = parse_labeled_csv(text.as_bytes(), "y", None).unwrap();
        assert_eq!(parsed.class_names, vec!["2", "9", "10"]);
    }

    #[test]
    fn missing_label_column_is_named_in_error() {
        let text = "a,b\n1,2\n";
        let err = parse_labeled_csv(text.as_bytes(), "species", None).unwrap_err();
        assert!(err.to_string().contains("species"), "{err}");
    }

    #[test]
    fn non_numeric_feature_reports_line_number() {
        let text = "a,y\n1.0,1\noops,2\n";
        let err = parse_labeled_csv(text.as_bytes(), "y", None).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("oops"), "{msg}");
    }

    #[test]
    fn non_finite_feature_is_rejected() {
        let text = "a,y\ninf,1\n2.0,2\n";
        let err = parse_labeled_csv(text.as_bytes(), "y", None).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn single_class_is_rejected() {
        let text = "a,y\n1.0,1\n2.0,1\n";
        assert!(parse_labeled_csv(text.as_bytes(), "y", None).is_err());
    }

    #[test]
    fn forced_classes_pin_the_mapping() {
        let text = "a,y\n1.0,small\n2.0,small\n";
        let classes = vec!["small".to_string(), "large".to_string()];
        let parsed = parse_labeled_csv(text.as_bytes(), "y", Some(&classes)).unwrap();
        assert_eq!(parsed.dataset.labels(), &[1, 1]);
        assert_eq!(parsed.dataset.class_count(), 2);

        let unknown = "a,y\n1.0,medium\n2.0,small\n";
        assert!(parse_labeled_csv(unknown.as_bytes(), "y", Some(&classes)).is_err());
    }

    #[test]
    fn features_only_parse_drops_requested_column() {
        let text = "a,y,b\n1.0,x,2.0\n3.0,z,4.0\n";
        let rows = parse_features_csv(text.as_bytes(), Some("y")).unwrap();
        assert_eq!(rows.n, 2);
        assert_eq!(rows.dim, 2);
        assert_eq!(rows.row(1), &[3.0, 4.0]);

        let all = parse_features_csv("a,b\n1,2\n".as_bytes(), None).unwrap();
        assert_eq!(all.dim, 2);
    }
}
