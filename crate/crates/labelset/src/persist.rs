//! Versioned, self-describing text artifacts for fitted models and
//! calibrated thresholds.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! load reproduces the stored values bit-for-bit; logistic posteriors in
//! particular survive a save/load cycle bit-identically. Readers reject
//! unknown format versions and never trust declared counts for allocation.

use std::fmt::Write as _;
use std::path::Path;

use crate::calibration::CalibratedThresholds;
use crate::dataset::{Fingerprint, LabeledDataset};
use crate::error::{Error, Result};
use crate::estimators::{
    fit_knn, FitDiagnostics, FittedBandwidths, KernelMode, KernelModel, KnnModel, LogisticModel,
};
use crate::predict::PosteriorModel;
use crate::threshold::{CoverageSpec, Threshold, ThresholdVector};

pub const MODEL_VERSION: &str = "v1";
pub const THRESHOLDS_VERSION: &str = "v1";

const MODEL_HEADER: &str = "labelset-model";
const THRESHOLDS_HEADER: &str = "labelset-thresholds";

/// Any of the fitted estimators, behind one posterior interface.
#[derive(Debug, Clone)]
pub enum FittedModel {
    Knn(KnnModel),
    Kernel(KernelModel),
    Logistic(LogisticModel),
}

impl FittedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            FittedModel::Knn(_) => "knn",
            FittedModel::Kernel(_) => "kernel",
            FittedModel::Logistic(_) => "logistic",
        }
    }
}

impl PosteriorModel for FittedModel {
    fn class_count(&self) -> usize {
        match self {
            FittedModel::Knn(m) => m.class_count(),
            FittedModel::Kernel(m) => m.class_count(),
            FittedModel::Logistic(m) => m.class_count(),
        }
    }

    fn feature_dim(&self) -> usize {
        match self {
            FittedModel::Knn(m) => m.feature_dim(),
            FittedModel::Kernel(m) => m.feature_dim(),
            FittedModel::Logistic(m) => m.feature_dim(),
        }
    }

    fn posterior(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            FittedModel::Knn(m) => m.posterior(x),
            FittedModel::Kernel(m) => m.posterior(x),
            FittedModel::Logistic(m) => m.posterior(x),
        }
    }

    fn training_fingerprint(&self) -> Option<Fingerprint> {
        match self {
            FittedModel::Knn(m) => m.training_fingerprint(),
            FittedModel::Kernel(m) => m.training_fingerprint(),
            FittedModel::Logistic(m) => m.training_fingerprint(),
        }
    }
}

/// A model plus the class names used to map labels at prediction time.
#[derive(Debug, Clone)]
pub struct ModelArtifact {
    pub model: FittedModel,
    pub class_names: Vec<String>,
}

impl ModelArtifact {
    pub fn new(model: FittedModel, class_names: Vec<String>) -> Result<Self> {
        if class_names.len() != model.class_count() {
            return Err(Error::invalid_argument(format!(
                "{} class names for {} classes",
                class_names.len(),
                model.class_count()
            )));
        }
        Ok(ModelArtifact { model, class_names })
    }

    /// Default names "1".."K".
    pub fn with_default_names(model: FittedModel) -> Self {
        let class_names = (1..=model.class_count()).map(|y| y.to_string()).collect();
        ModelArtifact { model, class_names }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MODEL_HEADER} {MODEL_VERSION}");
        let _ = writeln!(out, "classes {}", self.model.class_count());
        let _ = writeln!(out, "dim {}", self.model.feature_dim());
        for (y, name) in self.class_names.iter().enumerate() {
            let _ = writeln!(out, "class-name {} {}", y + 1, name);
        }
        if let Some(fp) = self.model.training_fingerprint() {
            let _ = writeln!(out, "fingerprint {fp}");
        }
        let _ = writeln!(out, "kind {}", self.model.kind());
        match &self.model {
            FittedModel::Knn(m) => {
                let _ = writeln!(out, "k {}", m.k());
                write_dataset(&mut out, m.data());
            }
            FittedModel::Kernel(m) => {
                let mode = match m.mode() {
                    KernelMode::Regression => "regression",
                    KernelMode::ClassConditional => "class-conditional",
                };
                let _ = writeln!(out, "mode {mode}");
                match m.bandwidths() {
                    FittedBandwidths::Shared(h) => {
                        let _ = writeln!(out, "bandwidth shared {}", join_floats(h));
                    }
                    FittedBandwidths::PerClass(per) => {
                        for (y, h) in per.iter().enumerate() {
                            let _ = writeln!(out, "bandwidth class {} {}", y + 1, join_floats(h));
                        }
                    }
                }
                write_dataset(&mut out, m.data());
            }
            FittedModel::Logistic(m) => {
                let _ = writeln!(out, "lambda {}", m.lambda());
                let d = m.diagnostics();
                let _ = writeln!(out, "iterations {}", d.iterations);
                let _ = writeln!(out, "gradient-norm {}", d.final_gradient_norm);
                let _ = writeln!(out, "converged {}", d.converged);
                let width = m.feature_dim() + 1;
                for y in 0..m.class_count() {
                    let row = &m.coefficients()[y * width..(y + 1) * width];
                    let _ = writeln!(out, "coef {}", join_floats(row));
                }
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cur = Cursor::new(text, "model");
        cur.expect_version(MODEL_HEADER, MODEL_VERSION)?;
        let classes: usize = cur.parse_value("classes")?;
        let dim: usize = cur.parse_value("dim")?;
        if !(2..=100_000).contains(&classes) {
            return Err(cur.malformed(format!("implausible class count {classes}")));
        }
        if dim == 0 || dim > 1_000_000 {
            return Err(cur.malformed(format!("implausible dimension {dim}")));
        }
        let mut class_names = Vec::new();
        for y in 1..=classes {
            let rest = cur.expect_key("class-name")?;
            let (idx, name) = rest
                .split_once(' ')
                .ok_or_else(|| cur.malformed("class-name needs an index and a name"))?;
            if idx.parse::<usize>().ok() != Some(y) {
                return Err(cur.malformed(format!("class-name {idx} out of order")));
            }
            class_names.push(name.to_string());
        }
        let fingerprint = match cur.peek_key("fingerprint") {
            Some(rest) => {
                let fp = Fingerprint::parse(rest)
                    .ok_or_else(|| cur.malformed("unreadable fingerprint"))?;
                cur.advance();
                Some(fp)
            }
            None => None,
        };
        let kind = cur.expect_key("kind")?.to_string();

        let model = match kind.as_str() {
            "knn" => {
                let k: usize = cur.parse_value("k")?;
                let data = read_dataset(&mut cur, classes, dim)?;
                let model = fit_knn(&data, k)
                    .map_err(|e| cur.malformed(format!("stored k is invalid: {e}")))?;
                check_fingerprint(&cur, fingerprint, model.training_fingerprint())?;
                FittedModel::Knn(model)
            }
            "kernel" => {
                let mode = match cur.expect_key("mode")? {
                    "regression" => KernelMode::Regression,
                    "class-conditional" => KernelMode::ClassConditional,
                    other => return Err(cur.malformed(format!("unknown kernel mode {other:?}"))),
                };
                let bandwidths = read_bandwidths(&mut cur, classes, dim)?;
                let data = read_dataset(&mut cur, classes, dim)?;
                let model = KernelModel::from_parts(data, mode, bandwidths);
                check_fingerprint(&cur, fingerprint, model.training_fingerprint())?;
                FittedModel::Kernel(model)
            }
            "logistic" => {
                let lambda: f64 = cur.parse_value("lambda")?;
                let iterations: usize = cur.parse_value("iterations")?;
                let final_gradient_norm: f64 = cur.parse_value("gradient-norm")?;
                let converged: bool = cur.parse_value("converged")?;
                let mut coef = Vec::new();
                for _ in 0..classes {
                    let row = parse_floats(cur.expect_key("coef")?, &cur)?;
                    if row.len() != dim + 1 {
                        return Err(cur.malformed(format!(
                            "coefficient row has {} entries, expected {}",
                            row.len(),
                            dim + 1
                        )));
                    }
                    coef.extend(row);
                }
                if !lambda.is_finite() || lambda < 0.0 {
                    return Err(cur.malformed("stored lambda must be nonnegative"));
                }
                let fp = fingerprint
                    .ok_or_else(|| cur.malformed("logistic artifact needs a fingerprint"))?;
                let model = LogisticModel::from_parts(
                    coef,
                    classes,
                    dim,
                    lambda,
                    FitDiagnostics {
                        iterations,
                        final_gradient_norm,
                        converged,
                    },
                    fp,
                )
                .map_err(|e| cur.malformed(format!("{e}")))?;
                FittedModel::Logistic(model)
            }
            other => return Err(cur.malformed(format!("unknown estimator kind {other:?}"))),
        };
        cur.expect_end()?;
        ModelArtifact::new(model, class_names)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_text(&text)
    }
}

fn check_fingerprint(
    cur: &Cursor<'_>,
    stored: Option<Fingerprint>,
    computed: Option<Fingerprint>,
) -> Result<()> {
    if let (Some(a), Some(b)) = (stored, computed) {
        if a != b {
            return Err(cur.malformed(
                "embedded training data does not match the recorded fingerprint",
            ));
        }
    }
    Ok(())
}

fn write_dataset(out: &mut String, data: &LabeledDataset) {
    let _ = writeln!(out, "rows {}", data.n());
    let labels: Vec<String> = data.labels().iter().map(|y| y.to_string()).collect();
    let _ = writeln!(out, "labels {}", labels.join(" "));
    for i in 0..data.n() {
        let _ = writeln!(out, "row {}", join_floats(data.row(i)));
    }
}

fn read_dataset(cur: &mut Cursor<'_>, classes: usize, dim: usize) -> Result<LabeledDataset> {
    let rows: usize = cur.parse_value("rows")?;
    if rows == 0 {
        return Err(cur.malformed("dataset must have at least one row"));
    }
    let labels: Vec<usize> = cur
        .expect_key("labels")?
        .split_ascii_whitespace()
        .map(|tok| {
            tok.parse::<usize>()
                .map_err(|_| cur.malformed(format!("unreadable label {tok:?}")))
        })
        .collect::<Result<_>>()?;
    if labels.len() != rows {
        return Err(cur.malformed(format!(
            "{} labels for {rows} declared rows",
            labels.len()
        )));
    }
    let mut features = Vec::new();
    for _ in 0..rows {
        let row = parse_floats(cur.expect_key("row")?, cur)?;
        if row.len() != dim {
            return Err(cur.malformed(format!(
                "feature row has {} entries, expected {dim}",
                row.len()
            )));
        }
        features.extend(row);
    }
    LabeledDataset::new(features, dim, labels, classes)
        .map_err(|e| cur.malformed(format!("embedded dataset invalid: {e}")))
}

fn read_bandwidths(
    cur: &mut Cursor<'_>,
    classes: usize,
    dim: usize,
) -> Result<FittedBandwidths> {
    let first = cur.expect_key("bandwidth")?;
    let check = |cur: &Cursor<'_>, h: &[f64]| -> Result<()> {
        if h.len() != dim {
            return Err(cur.malformed(format!(
                "bandwidth vector has {} entries, expected {dim}",
                h.len()
            )));
        }
        if h.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(cur.malformed("bandwidths must be positive"));
        }
        Ok(())
    };
    if let Some(rest) = first.strip_prefix("shared ") {
        let h = parse_floats(rest, cur)?;
        check(cur, &h)?;
        return Ok(FittedBandwidths::Shared(h));
    }
    let mut per_class = Vec::new();
    let mut line = first.to_string();
    for y in 1..=classes {
        let rest = line
            .strip_prefix("class ")
            .ok_or_else(|| cur.malformed("expected `bandwidth class <y> <values>`"))?;
        let (idx, values) = rest
            .split_once(' ')
            .ok_or_else(|| cur.malformed("bandwidth line needs values"))?;
        if idx.parse::<usize>().ok() != Some(y) {
            return Err(cur.malformed(format!("bandwidth class {idx} out of order")));
        }
        let h = parse_floats(values, cur)?;
        check(cur, &h)?;
        per_class.push(h);
        if y < classes {
            line = cur.expect_key("bandwidth")?.to_string();
        }
    }
    Ok(FittedBandwidths::PerClass(per_class))
}

/// Calibrated thresholds with their provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdArtifact {
    pub thresholds: ThresholdVector,
    pub method: String,
    /// Error levels: one entry in total mode, one per class otherwise.
    pub alphas: Option<Vec<f64>>,
    pub calibration_sizes: Option<Vec<usize>>,
    pub notes: Vec<String>,
}

impl ThresholdArtifact {
    pub fn new(thresholds: ThresholdVector, method: impl Into<String>) -> Self {
        ThresholdArtifact {
            thresholds,
            method: method.into(),
            alphas: None,
            calibration_sizes: None,
            notes: Vec::new(),
        }
    }

    /// Wrap a calibration result, noting every class that ended up with the
    /// INCLUDE_ALL sentinel.
    pub fn from_calibrated(calibrated: &CalibratedThresholds) -> Self {
        let alphas = match &calibrated.coverage {
            CoverageSpec::Total { alpha } => vec![*alpha],
            CoverageSpec::ClassSpecific { alphas } => alphas.clone(),
        };
        let mut notes = Vec::new();
        if let ThresholdVector::PerClass(entries) = &calibrated.thresholds {
            for (y, entry) in entries.iter().enumerate() {
                if entry.is_include_all() {
                    notes.push(format!(
                        "class {} uses INCLUDE_ALL: floor(alpha*(m+1)) = 0, the conformal test accepts every score",
                        y + 1
                    ));
                }
            }
        } else if let ThresholdVector::Total(entry) = &calibrated.thresholds {
            if entry.is_include_all() {
                notes.push(
                    "total threshold is INCLUDE_ALL: floor(alpha*(m+1)) = 0, the conformal test accepts every score"
                        .to_string(),
                );
            }
        }
        ThresholdArtifact {
            thresholds: calibrated.thresholds.clone(),
            method: calibrated.method.name().to_string(),
            alphas: Some(alphas),
            calibration_sizes: Some(calibrated.calibration_sizes.clone()),
            notes,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{THRESHOLDS_HEADER} {THRESHOLDS_VERSION}");
        let mode = match self.thresholds {
            ThresholdVector::Total(_) => "total",
            ThresholdVector::PerClass(_) => "class-specific",
        };
        let _ = writeln!(out, "mode {mode}");
        let _ = writeln!(out, "method {}", self.method);
        if let Some(alphas) = &self.alphas {
            let _ = writeln!(out, "alphas {}", join_floats(alphas));
        }
        if let Some(sizes) = &self.calibration_sizes {
            let rendered: Vec<String> = sizes.iter().map(|s| s.to_string()).collect();
            let _ = writeln!(out, "sizes {}", rendered.join(" "));
        }
        let entries: Vec<String> = match &self.thresholds {
            ThresholdVector::Total(t) => vec![render_threshold(*t)],
            ThresholdVector::PerClass(v) => v.iter().map(|t| render_threshold(*t)).collect(),
        };
        let _ = writeln!(out, "entries {}", entries.join(" "));
        for note in &self.notes {
            let _ = writeln!(out, "note {note}");
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cur = Cursor::new(text, "thresholds");
        cur.expect_version(THRESHOLDS_HEADER, THRESHOLDS_VERSION)?;
        let mode = cur.expect_key("mode")?.to_string();
        let method = cur.expect_key("method")?.to_string();
        let alphas = match cur.peek_key("alphas") {
            Some(rest) => {
                let values = parse_floats(rest, &cur)?;
                if values.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
                    return Err(cur.malformed("error levels must lie strictly in (0, 1)"));
                }
                cur.advance();
                Some(values)
            }
            None => None,
        };
        let calibration_sizes = match cur.peek_key("sizes") {
            Some(rest) => {
                let sizes = rest
                    .split_ascii_whitespace()
                    .map(|tok| {
                        tok.parse::<usize>()
                            .map_err(|_| cur.malformed(format!("unreadable size {tok:?}")))
                    })
                    .collect::<Result<Vec<usize>>>()?;
                cur.advance();
                Some(sizes)
            }
            None => None,
        };
        let raw_entries = cur.expect_key("entries")?;
        let mut entries = Vec::new();
        for tok in raw_entries.split_ascii_whitespace() {
            if tok == "INCLUDE_ALL" {
                entries.push(Threshold::IncludeAll);
            } else {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| cur.malformed(format!("unreadable threshold {tok:?}")))?;
                entries.push(Threshold::Finite(v));
            }
        }
        let thresholds = match mode.as_str() {
            "total" => {
                if entries.len() != 1 {
                    return Err(cur.malformed(format!(
                        "total mode stores exactly one entry, found {}",
                        entries.len()
                    )));
                }
                ThresholdVector::total_entry(entries[0])
                    .map_err(|e| cur.malformed(format!("{e}")))?
            }
            "class-specific" => ThresholdVector::from_entries(entries)
                .map_err(|e| cur.malformed(format!("{e}")))?,
            other => return Err(cur.malformed(format!("unknown mode {other:?}"))),
        };
        let mut notes = Vec::new();
        while let Some(rest) = cur.peek_key("note") {
            notes.push(rest.to_string());
            cur.advance();
        }
        cur.expect_end()?;
        Ok(ThresholdArtifact {
            thresholds,
            method,
            alphas,
            calibration_sizes,
            notes,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_text(&text)
    }
}

fn render_threshold(t: Threshold) -> String {
    match t {
        Threshold::IncludeAll => "INCLUDE_ALL".to_string(),
        Threshold::Finite(v) => v.to_string(),
    }
}

fn join_floats(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_floats(text: &str, cur: &Cursor<'_>) -> Result<Vec<f64>> {
    text.split_ascii_whitespace()
        .map(|tok| {
            let v: f64 = tok
                .parse()
                .map_err(|_| cur.malformed(format!("unreadable number {tok:?}")))?;
            if !v.is_finite() {
                return Err(cur.malformed(format!("non-finite number {tok:?}")));
            }
            Ok(v)
        })
        .collect()
}

/// Line cursor over an artifact body. Blank lines are ignored; keys are the
/// first space-separated token of each line.
struct Cursor<'a> {
    lines: Vec<&'a str>,
    pos: usize,
    kind: &'static str,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str, kind: &'static str) -> Self {
        let lines = text
            .lines()
            .map(|l| l.trim_end_matches('\r'))
            .filter(|l| !l.trim().is_empty())
            .collect();
        Cursor {
            lines,
            pos: 0,
            kind,
        }
    }

    fn malformed(&self, msg: impl Into<String>) -> Error {
        Error::MalformedArtifact {
            kind: self.kind,
            msg: msg.into(),
        }
    }

    fn expect_version(&mut self, header: &str, expected: &'static str) -> Result<()> {
        let line = self
            .lines
            .first()
            .ok_or_else(|| self.malformed("empty artifact"))?;
        let Some(version) = line.strip_prefix(header).map(str::trim) else {
            return Err(self.malformed(format!("missing {header} header")));
        };
        if version != expected {
            return Err(Error::UnsupportedVersion {
                kind: self.kind,
                found: version.to_string(),
                expected,
            });
        }
        self.pos = 1;
        Ok(())
    }

    fn advance(&mut self) {
        self.pos += 1;
    }

    fn current(&self) -> Result<&'a str> {
        self.lines
            .get(self.pos)
            .copied()
            .ok_or_else(|| self.malformed("artifact ends prematurely"))
    }

    /// Consume a `key rest...` line, returning `rest`.
    fn expect_key(&mut self, key: &str) -> Result<&'a str> {
        let line = self.current()?;
        let rest = line.strip_prefix(key).ok_or_else(|| {
            self.malformed(format!("expected {key:?}, found {line:?}"))
        })?;
        let rest = rest.strip_prefix(' ').unwrap_or(rest);
        if !rest.is_empty() && line.as_bytes().get(key.len()) != Some(&b' ') {
            return Err(self.malformed(format!("expected {key:?}, found {line:?}")));
        }
        self.pos += 1;
        Ok(rest.trim())
    }

    /// Like `expect_key` but without consuming or failing.
    fn peek_key(&self, key: &str) -> Option<&'a str> {
        let line = self.lines.get(self.pos)?;
        let rest = line.strip_prefix(key)?;
        if !rest.is_empty() && !rest.starts_with(' ') {
            return None;
        }
        Some(rest.trim())
    }

    fn parse_value<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let raw = self.expect_key(key)?;
        raw.parse::<T>()
            .map_err(|_| self.malformed(format!("unreadable {key} value {raw:?}")))
    }

    fn expect_end(&mut self) -> Result<()> {
        let line = self.current()?;
        if line.trim() != "end" {
            return Err(self.malformed(format!("expected end marker, found {line:?}")));
        }
        self.pos += 1;
        if self.pos != self.lines.len() {
            return Err(self.malformed("trailing content after end marker"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::{calibrate, CalibrationMethod};
    use crate::estimators::{fit_kernel, fit_logistic, Bandwidth};
    use crate::rng;
    use rand::Rng;

    fn toy_data(n: usize, seed: u64) -> LabeledDataset {
        let mut rng = rng::stream(seed, "persist-test", 0, 0);
        let features: Vec<f64> = (0..n * 2).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let labels: Vec<usize> = (0..n).map(|i| 1 + i % 3).collect();
        LabeledDataset::new(features, 2, labels, 3).unwrap()
    }

    #[test]
    fn logistic_round_trip_is_bit_identical() {
        let data = toy_data(24, 1);
        let model = fit_logistic(&data, 0.2, 300, 1e-7).unwrap();
        let artifact = ModelArtifact::with_default_names(FittedModel::Logistic(model));
        let restored = ModelArtifact::from_text(&artifact.to_text()).unwrap();

        let mut rng = rng::stream(2, "persist-queries", 0, 0);
        for _ in 0..25 {
            let q = [rng.random::<f64>() * 6.0 - 3.0, rng.random::<f64>() * 6.0 - 3.0];
            let a = artifact.model.posterior(&q).unwrap();
            let b = restored.model.posterior(&q).unwrap();
            assert_eq!(a, b, "posteriors must round-trip bit-identically");
        }
        assert_eq!(
            artifact.model.training_fingerprint(),
            restored.model.training_fingerprint()
        );
    }

    #[test]
    fn knn_round_trip() {
        let data = toy_data(12, 3);
        let model = fit_knn(&data, 4).unwrap();
        let artifact =
            ModelArtifact::new(FittedModel::Knn(model), vec!["a".into(), "b".into(), "c".into()])
                .unwrap();
        let restored = ModelArtifact::from_text(&artifact.to_text()).unwrap();
        assert_eq!(restored.class_names, artifact.class_names);
        let q = [0.3, -0.8];
        assert_eq!(
            artifact.model.posterior(&q).unwrap(),
            restored.model.posterior(&q).unwrap()
        );
    }

    #[test]
    fn kernel_round_trip_both_bandwidth_layouts() {
        let data = toy_data(18, 4);
        for (bw, mode) in [
            (Bandwidth::Auto, KernelMode::Regression),
            (Bandwidth::Auto, KernelMode::ClassConditional),
            (
                Bandwidth::Explicit(vec![0.4, 0.6]),
                KernelMode::ClassConditional,
            ),
        ] {
            let model = fit_kernel(&data, bw, mode).unwrap();
            let artifact = ModelArtifact::with_default_names(FittedModel::Kernel(model));
            let restored = ModelArtifact::from_text(&artifact.to_text()).unwrap();
            let q = [0.1, 0.2];
            assert_eq!(
                artifact.model.posterior(&q).unwrap(),
                restored.model.posterior(&q).unwrap()
            );
        }
    }

    #[test]
    fn unknown_version_is_rejected_with_version_error() {
        let data = toy_data(12, 5);
        let model = fit_knn(&data, 2).unwrap();
        let artifact = ModelArtifact::with_default_names(FittedModel::Knn(model));
        let text = artifact.to_text().replace("labelset-model v1", "labelset-model v9");
        match ModelArtifact::from_text(&text) {
            Err(Error::UnsupportedVersion { found, .. }) => assert_eq!(found, "v9"),
            other => panic!("expected version error, got {other:?}"),
        }
    }

    #[test]
    fn tampered_data_fails_the_fingerprint_check() {
        let data = toy_data(8, 6);
        let model = fit_knn(&data, 2).unwrap();
        let artifact = ModelArtifact::with_default_names(FittedModel::Knn(model));
        let text = artifact.to_text();
        let first_row_line = text
            .lines()
            .find(|l| l.starts_with("row "))
            .unwrap()
            .to_string();
        let tampered = text.replace(&first_row_line, "row 9.5 9.5");
        match ModelArtifact::from_text(&tampered) {
            Err(Error::MalformedArtifact { msg, .. }) => {
                assert!(msg.contains("fingerprint"), "{msg}")
            }
            other => panic!("expected fingerprint mismatch, got {other:?}"),
        }
    }

    #[test]
    fn malformed_inputs_error_cleanly() {
        for text in [
            "",
            "garbage",
            "labelset-model v1\n",
            "labelset-model v1\nclasses 2\ndim 1\nclass-name 1 a\nclass-name 2 b\nkind qux\nend\n",
            "labelset-model v1\nclasses 99999999999999999999\n",
            "labelset-thresholds v1\nmode diagonal\nmethod x\nentries 0.5\nend\n",
            "labelset-thresholds v1\nmode total\nmethod x\nentries 0.5 0.6\nend\n",
            "labelset-thresholds v1\nmode total\nmethod x\nentries 1.5\nend\n",
            // logistic without the fingerprint line
            "labelset-model v1\nclasses 2\ndim 1\nclass-name 1 a\nclass-name 2 b\nkind logistic\nlambda 0\niterations 0\ngradient-norm 0\nconverged false\ncoef 0 0\ncoef 0 0\nend\n",
        ] {
            assert!(
                ModelArtifact::from_text(text).is_err() && ThresholdArtifact::from_text(text).is_err(),
                "accepted: {text:?}"
            );
        }
    }

    #[test]
    fn thresholds_round_trip_with_sentinel_and_notes() {
        let data = toy_data(30, 7);
        let model = fit_knn(&data, 5).unwrap();
        let spec = CoverageSpec::class_specific(vec![0.05, 0.05, 0.05]).unwrap();
        let plan = crate::dataset::split(&data, 9, 0.5).unwrap();
        let fitted = fit_knn(&data.subset(plan.fit()).unwrap(), 3).unwrap();
        let _ = model;
        let calibrated = calibrate(
            &fitted,
            &data,
            Some(&plan),
            &spec,
            CalibrationMethod::SplitConformal,
        )
        .unwrap();
        let artifact = ThresholdArtifact::from_calibrated(&calibrated);
        // Tiny per-class calibration sets at alpha = 0.05 force the sentinel.
        assert!(artifact.notes.iter().any(|n| n.contains("INCLUDE_ALL")));
        let restored = ThresholdArtifact::from_text(&artifact.to_text()).unwrap();
        assert_eq!(artifact, restored);
    }

    #[test]
    fn threshold_text_round_trips_exact_floats() {
        let thresholds = ThresholdVector::per_class(vec![0.1 + 0.2, 1e-180, 0.999999999999]).unwrap();
        let artifact = ThresholdArtifact::new(thresholds.clone(), "manual");
        let restored = ThresholdArtifact::from_text(&artifact.to_text()).unwrap();
        assert_eq!(restored.thresholds, thresholds);
    }

    #[test]
    fn save_and_load_files() {
        let dir = tempfile::tempdir().unwrap();
        let data = toy_data(10, 8);
        let model = fit_knn(&data, 3).unwrap();
        let artifact = ModelArtifact::with_default_names(FittedModel::Knn(model));
        let path = dir.path().join("model.txt");
        artifact.save(&path).unwrap();
        let restored = ModelArtifact::load(&path).unwrap();
        assert_eq!(restored.class_names, artifact.class_names);

        let missing = ModelArtifact::load(&dir.path().join("nope.txt"));
        assert!(matches!(missing, Err(Error::Io { .. })));
    }
}
