//! Threshold calibration.
//!
//! Two routes to a cut-off achieving target coverage:
//!
//! * Plug-in: the largest score value whose empirical coverage on the
//!   calibration scores is still at least `1 - alpha`
//!   (`sup { t : Cov(t) >= 1 - alpha }` evaluated over the sample values).
//! * Split-conformal: a rank statistic on a held-out calibration half. With
//!   `m` calibration scores and `kappa = floor(alpha * (m + 1))`, the
//!   threshold is the `kappa`-th smallest score; at most `kappa` of the
//!   `m + 1` exchangeable scores fall strictly below it, so the exclusion
//!   probability is at most `kappa / (m + 1) <= alpha` for any distribution.
//!   When `kappa = 0` the conformal test accepts every score and no finite
//!   cut is certified; the `IncludeAll` sentinel is returned so the
//!   finite-sample guarantee stays unconditional.

use crate::dataset::{LabeledDataset, SplitPlan};
use crate::error::{Error, Result};
use crate::predict::PosteriorModel;
use crate::threshold::{CoverageSpec, Threshold, ThresholdVector};

/// Posterior scores to calibrate against, with their source rows.
///
/// Ties are ordered by source index, so every sorted view is deterministic.
#[derive(Debug, Clone)]
pub struct ScoreSample {
    scores: Vec<f64>,
    source: Vec<usize>,
    class: Option<usize>,
}

impl ScoreSample {
    /// `source` defaults to `0..n`; a class tag marks per-class samples.
    pub fn new(scores: Vec<f64>, source: Option<Vec<usize>>, class: Option<usize>) -> Result<Self> {
        for &s in &scores {
            if !s.is_finite() || !(0.0..=1.0).contains(&s) {
                return Err(Error::invalid_data(format!(
                    "score {s} outside [0, 1]"
                )));
            }
        }
        let source = match source {
            Some(src) => {
                if src.len() != scores.len() {
                    return Err(Error::invalid_argument(
                        "source indices must match scores in length",
                    ));
                }
                src
            }
            None => (0..scores.len()).collect(),
        };
        Ok(ScoreSample {
            scores,
            source,
            class,
        })
    }

    pub fn from_scores(scores: Vec<f64>) -> Result<Self> {
        ScoreSample::new(scores, None, None)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn class(&self) -> Option<usize> {
        self.class
    }

    /// Scores sorted ascending by (value, source index).
    pub fn sorted(&self) -> Vec<f64> {
        let mut order: Vec<usize> = (0..self.scores.len()).collect();
        order.sort_by(|&a, &b| {
            self.scores[a]
                .partial_cmp(&self.scores[b])
                .expect("finite scores")
                .then(self.source[a].cmp(&self.source[b]))
        });
        order.into_iter().map(|i| self.scores[i]).collect()
    }
}

/// Largest sample value `t` with `#\{scores >= t\} / n >= 1 - alpha`.
/// The minimum score always qualifies, so the sup is attained in-sample.
pub fn plugin_threshold_value(scores: &ScoreSample, alpha: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::invalid_argument(
            "plug-in calibration needs at least one score",
        ));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid_argument(format!(
            "alpha must lie strictly in (0, 1), got {alpha}"
        )));
    }
    let sorted = scores.sorted();
    let n = sorted.len();
    let need = 1.0 - alpha;
    // Walk distinct values from the largest down; coverage of value v is the
    // fraction of scores >= v, i.e. (n - first_index_of_v) / n.
    let mut i = n;
    while i > 0 {
        let mut first = i - 1;
        while first > 0 && sorted[first - 1] == sorted[i - 1] {
            first -= 1;
        }
        let coverage = (n - first) as f64 / n as f64;
        if coverage >= need {
            return Ok(sorted[i - 1]);
        }
        i = first;
    }
    unreachable!("the minimum score has coverage 1");
}

/// Plug-in threshold for total coverage.
pub fn plugin_total_threshold(scores: &ScoreSample, alpha: f64) -> Result<ThresholdVector> {
    ThresholdVector::total(plugin_threshold_value(scores, alpha)?)
}

/// Plug-in thresholds per class; `class_scores[y - 1]` holds class `y`'s
/// scores `p(y | X_i)` over its own rows.
pub fn plugin_class_thresholds(
    class_scores: &[ScoreSample],
    alphas: &[f64],
) -> Result<ThresholdVector> {
    if class_scores.len() != alphas.len() {
        return Err(Error::invalid_argument(format!(
            "{} score samples but {} error levels",
            class_scores.len(),
            alphas.len()
        )));
    }
    let mut entries = Vec::with_capacity(alphas.len());
    for (idx, (scores, &alpha)) in class_scores.iter().zip(alphas).enumerate() {
        if scores.is_empty() {
            return Err(Error::EmptyClass { class: idx + 1 });
        }
        entries.push(Threshold::Finite(plugin_threshold_value(scores, alpha)?));
    }
    ThresholdVector::from_entries(entries)
}

/// Rank-based exchangeability score of a candidate against calibration
/// scores: `(#\{scores <= candidate\} + 1) / (m + 1)`, in `[1/(m+1), 1]`.
pub fn conformal_p_value(candidate: f64, calibration: &ScoreSample) -> Result<f64> {
    if calibration.is_empty() {
        return Err(Error::invalid_argument(
            "conformal p-value needs a nonempty calibration sample",
        ));
    }
    let m = calibration.len();
    let count = calibration
        .scores()
        .iter()
        .filter(|&&s| s <= candidate)
        .count();
    Ok((count + 1) as f64 / (m + 1) as f64)
}

/// Split-conformal threshold entry at level `alpha`.
pub fn conformal_threshold(calibration: &ScoreSample, alpha: f64) -> Result<Threshold> {
    if calibration.is_empty() {
        return Err(Error::invalid_argument(
            "conformal calibration needs at least one score",
        ));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid_argument(format!(
            "alpha must lie strictly in (0, 1), got {alpha}"
        )));
    }
    let m = calibration.len();
    let kappa = (alpha * (m as f64 + 1.0)).floor() as usize;
    if kappa == 0 {
        return Ok(Threshold::IncludeAll);
    }
    let sorted = calibration.sorted();
    Ok(Threshold::Finite(sorted[kappa - 1]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibrationMethod {
    Plugin,
    SplitConformal,
}

impl CalibrationMethod {
    pub fn name(self) -> &'static str {
        match self {
            CalibrationMethod::Plugin => "plugin",
            CalibrationMethod::SplitConformal => "split-conformal",
        }
    }
}

/// Thresholds plus the calibration metadata worth persisting.
#[derive(Debug, Clone)]
pub struct CalibratedThresholds {
    pub thresholds: ThresholdVector,
    pub method: CalibrationMethod,
    pub coverage: CoverageSpec,
    /// Calibration sample sizes: one entry in total mode, one per class in
    /// class-specific mode.
    pub calibration_sizes: Vec<usize>,
}

/// Score the calibration rows of `data` under `model` and dispatch to the
/// threshold rules.
///
/// Without a plan, plug-in calibration scores every row. With a plan, scores
/// are restricted to the calibration half, and a fitted model must carry the
/// fingerprint of exactly the fit half (the leakage guard). Split-conformal
/// calibration requires a plan.
pub fn calibrate<M: PosteriorModel + ?Sized>(
    model: &M,
    data: &LabeledDataset,
    plan: Option<&SplitPlan>,
    spec: &CoverageSpec,
    method: CalibrationMethod,
) -> Result<CalibratedThresholds> {
    if data.class_count() != model.class_count() {
        return Err(Error::invalid_argument(format!(
            "data has {} classes but the model has {}",
            data.class_count(),
            model.class_count()
        )));
    }
    if let CoverageSpec::ClassSpecific { alphas } = spec {
        if alphas.len() != data.class_count() {
            return Err(Error::invalid_argument(format!(
                "{} error levels for {} classes",
                alphas.len(),
                data.class_count()
            )));
        }
    }
    if method == CalibrationMethod::SplitConformal && plan.is_none() {
        return Err(Error::invalid_argument(
            "split-conformal calibration requires a split plan",
        ));
    }
    if let Some(plan) = plan {
        if let Some(fp) = model.training_fingerprint() {
            if plan.fit().is_empty() {
                return Err(Error::invalid_data("split plan has an empty fit half"));
            }
            if fp != data.subset(plan.fit())?.fingerprint() {
                return Err(Error::Leakage);
            }
        }
        if plan.calibration().is_empty() {
            return Err(Error::invalid_data("split plan has an empty calibration half"));
        }
    }

    let calibration_rows: Vec<usize> = match plan {
        Some(plan) => plan.calibration().to_vec(),
        None => (0..data.n()).collect(),
    };

    match spec {
        CoverageSpec::Total { alpha } => {
            let mut scores = Vec::with_capacity(calibration_rows.len());
            for &i in &calibration_rows {
                let probs = model.posterior(data.row(i))?;
                scores.push(probs[data.label(i) - 1]);
            }
            let sample = ScoreSample::new(scores, Some(calibration_rows.clone()), None)?;
            let thresholds = match method {
                CalibrationMethod::Plugin => plugin_total_threshold(&sample, *alpha)?,
                CalibrationMethod::SplitConformal => {
                    ThresholdVector::total_entry(conformal_threshold(&sample, *alpha)?)?
                }
            };
            Ok(CalibratedThresholds {
                thresholds,
                method,
                coverage: spec.clone(),
                calibration_sizes: vec![sample.len()],
            })
        }
        CoverageSpec::ClassSpecific { alphas } => {
            let k = data.class_count();
            let mut entries = Vec::with_capacity(k);
            let mut sizes = Vec::with_capacity(k);
            for y in 1..=k {
                let rows: Vec<usize> = calibration_rows
                    .iter()
                    .copied()
                    .filter(|&i| data.label(i) == y)
                    .collect();
                if rows.is_empty() {
                    return Err(Error::EmptyClass { class: y });
                }
                let mut scores = Vec::with_capacity(rows.len());
                for &i in &rows {
                    let probs = model.posterior(data.row(i))?;
                    scores.push(probs[y - 1]);
                }
                let sample = ScoreSample::new(scores, Some(rows), Some(y))?;
                let entry = match method {
                    CalibrationMethod::Plugin => {
                        Threshold::Finite(plugin_threshold_value(&sample, alphas[y - 1])?)
                    }
                    CalibrationMethod::SplitConformal => {
                        conformal_threshold(&sample, alphas[y - 1])?
                    }
                };
                entries.push(entry);
                sizes.push(sample.len());
            }
            Ok(CalibratedThresholds {
                thresholds: ThresholdVector::from_entries(entries)?,
                method,
                coverage: spec.clone(),
                calibration_sizes: sizes,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::split;
    use crate::estimators::fit_knn;
    use crate::predict::TablePosterior;

    fn sample(scores: &[f64]) -> ScoreSample {
        ScoreSample::from_scores(scores.to_vec()).unwrap()
    }

    /// Exhaustive maximizer over the sample values; the independent route
    /// the plug-in rule must match.
    fn brute_force_plugin(scores: &[f64], alpha: f64) -> f64 {
        let n = scores.len() as f64;
        scores
            .iter()
            .copied()
            .filter(|&t| scores.iter().filter(|&&s| s >= t).count() as f64 / n >= 1.0 - alpha)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn plugin_total_hand_enumeration() {
        // Coverages by value: 0.2 -> 1, 0.5 -> 0.75, 0.7 -> 0.5, 0.9 -> 0.25.
        let s = sample(&[0.2, 0.5, 0.7, 0.9]);
        assert_eq!(plugin_threshold_value(&s, 0.25).unwrap(), 0.5);
        assert_eq!(plugin_threshold_value(&s, 0.8).unwrap(), 0.9);
        assert_eq!(plugin_threshold_value(&s, 1e-9).unwrap(), 0.2);
        for alpha in [0.1, 0.25, 0.5, 0.8, 0.99] {
            assert_eq!(
                plugin_threshold_value(&s, alpha).unwrap(),
                brute_force_plugin(s.scores(), alpha)
            );
        }
    }

    #[test]
    fn plugin_handles_ties() {
        let s = sample(&[0.5, 0.5, 0.5, 0.9]);
        for alpha in [0.2, 0.5, 0.74, 0.76] {
            assert_eq!(
                plugin_threshold_value(&s, alpha).unwrap(),
                brute_force_plugin(s.scores(), alpha),
                "alpha = {alpha}"
            );
        }
    }

    #[test]
    fn plugin_class_thresholds_examples() {
        let classes = [sample(&[0.4, 0.8]), sample(&[0.4, 0.8])];
        let t = plugin_class_thresholds(&classes, &[0.5, 0.5]).unwrap();
        assert_eq!(t.entry(1), Threshold::Finite(0.8));
        assert_eq!(t.entry(1).cmp_value(t.entry(2)), std::cmp::Ordering::Equal);

        let t = plugin_class_thresholds(&classes, &[1e-12, 1e-12]).unwrap();
        assert_eq!(t.entry(1), Threshold::Finite(0.4));
    }

    #[test]
    fn plugin_empty_class_is_named() {
        let classes = [sample(&[0.4]), ScoreSample::from_scores(vec![]).unwrap()];
        match plugin_class_thresholds(&classes, &[0.5, 0.5]) {
            Err(Error::EmptyClass { class }) => assert_eq!(class, 2),
            other => panic!("expected EmptyClass, got {other:?}"),
        }
    }

    #[test]
    fn p_value_examples() {
        let cal = sample(&[0.2, 0.5, 0.7, 0.9]);
        assert_eq!(conformal_p_value(0.95, &cal).unwrap(), 1.0);
        assert_eq!(conformal_p_value(0.1, &cal).unwrap(), 0.2);
        assert_eq!(conformal_p_value(0.6, &cal).unwrap(), 0.6);
    }

    #[test]
    fn p_value_of_rth_smallest_is_rank_plus_one_over_m_plus_one() {
        // Distinct scores: the r-th smallest has r scores <= itself, so its
        // p-value against the full sample is (r + 1) / (m + 1).
        let cal = sample(&[0.1, 0.3, 0.55, 0.7, 0.95]);
        let sorted = cal.sorted();
        for (r0, &s) in sorted.iter().enumerate() {
            let p = conformal_p_value(s, &cal).unwrap();
            assert!((p - (r0 as f64 + 2.0) / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn conformal_threshold_rank_rule() {
        let cal = sample(&[0.2, 0.5, 0.7, 0.9]);
        assert_eq!(conformal_threshold(&cal, 0.25).unwrap(), Threshold::Finite(0.2));
        assert_eq!(conformal_threshold(&cal, 0.5).unwrap(), Threshold::Finite(0.5));
        assert_eq!(conformal_threshold(&cal, 0.1).unwrap(), Threshold::IncludeAll);
    }

    #[test]
    fn conformal_matches_min_over_sample_transcription() {
        // Direct transcription of the acceptance-region inequality:
        // min { s_i : #\{s_j <= s_i\} > alpha (m+1) - 1 }.
        let transcription = |scores: &[f64], alpha: f64| -> Option<f64> {
            let m = scores.len() as f64;
            scores
                .iter()
                .copied()
                .filter(|&si| {
                    let rank = scores.iter().filter(|&&sj| sj <= si).count() as f64;
                    rank > alpha * (m + 1.0) - 1.0
                })
                .fold(None, |acc: Option<f64>, v| {
                    Some(acc.map_or(v, |a| a.min(v)))
                })
        };
        let cal = sample(&[0.15, 0.33, 0.48, 0.62, 0.8, 0.91]);
        for alpha in [0.2, 0.35, 0.5, 0.77] {
            let kappa = (alpha * 7.0f64).floor() as usize;
            assert!(kappa >= 1);
            match conformal_threshold(&cal, alpha).unwrap() {
                Threshold::Finite(t) => {
                    assert_eq!(Some(t), transcription(cal.scores(), alpha), "alpha {alpha}")
                }
                Threshold::IncludeAll => panic!("kappa >= 1 must yield a finite cut"),
            }
        }
    }

    #[test]
    fn thresholds_are_monotone_in_alpha() {
        let cal = sample(&[0.05, 0.2, 0.33, 0.41, 0.58, 0.66, 0.79, 0.88, 0.93]);
        let grid = [0.01, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 0.95];
        let mut last_conformal = Threshold::IncludeAll;
        let mut last_plugin = f64::NEG_INFINITY;
        for &alpha in &grid {
            let c = conformal_threshold(&cal, alpha).unwrap();
            assert_ne!(last_conformal.cmp_value(c), std::cmp::Ordering::Greater);
            last_conformal = c;
            let p = plugin_threshold_value(&cal, alpha).unwrap();
            assert!(p >= last_plugin);
            last_plugin = p;
        }
    }

    #[test]
    fn plugin_self_coverage_is_exact() {
        let cal = sample(&[0.11, 0.42, 0.42, 0.55, 0.68, 0.71, 0.9]);
        for alpha in [0.05, 0.15, 0.33, 0.6, 0.85] {
            let t = plugin_threshold_value(&cal, alpha).unwrap();
            let covered = cal.scores().iter().filter(|&&s| s >= t).count() as f64;
            assert!(covered / cal.len() as f64 >= 1.0 - alpha);
        }
    }

    #[test]
    fn calibrate_trivial_model_all_scores_one() {
        // A model always outputting (1, 0) with all labels 1: every score is
        // 1, so the plug-in threshold is 1 for any alpha.
        let model = TablePosterior::new(vec![vec![1.0, 0.0]; 4]).unwrap();
        let data = LabeledDataset::new(vec![0.0, 1.0, 2.0, 3.0], 1, vec![1, 1, 1, 1], 2).unwrap();
        let spec = CoverageSpec::total(0.3).unwrap();
        let out = calibrate(&model, &data, None, &spec, CalibrationMethod::Plugin).unwrap();
        assert_eq!(out.thresholds.entry(1), Threshold::Finite(1.0));
        assert_eq!(out.calibration_sizes, vec![4]);
    }

    #[test]
    fn calibrate_conformal_requires_plan_and_is_deterministic() {
        let n = 40;
        let features: Vec<f64> = (0..n).map(|i| i as f64 * 0.25).collect();
        let labels: Vec<usize> = (0..n).map(|i| 1 + (i / 20)).collect();
        let data = LabeledDataset::new(features, 1, labels, 2).unwrap();
        let spec = CoverageSpec::class_specific(vec![0.2, 0.2]).unwrap();

        let plan = split(&data, 11, 0.5).unwrap();
        let model = fit_knn(&data.subset(plan.fit()).unwrap(), 3).unwrap();

        assert!(calibrate(&model, &data, None, &spec, CalibrationMethod::SplitConformal).is_err());

        let a = calibrate(
            &model,
            &data,
            Some(&plan),
            &spec,
            CalibrationMethod::SplitConformal,
        )
        .unwrap();
        let b = calibrate(
            &model,
            &data,
            Some(&plan),
            &spec,
            CalibrationMethod::SplitConformal,
        )
        .unwrap();
        assert_eq!(a.thresholds, b.thresholds);
        assert_eq!(a.calibration_sizes.len(), 2);
    }

    #[test]
    fn calibrate_detects_leakage() {
        let n = 20;
        let features: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let labels: Vec<usize> = (0..n).map(|i| 1 + i % 2).collect();
        let data = LabeledDataset::new(features, 1, labels, 2).unwrap();
        let plan = split(&data, 5, 0.5).unwrap();
        // Fitted on all rows, not the fit half.
        let model = fit_knn(&data, 3).unwrap();
        let spec = CoverageSpec::total(0.1).unwrap();
        match calibrate(
            &model,
            &data,
            Some(&plan),
            &spec,
            CalibrationMethod::SplitConformal,
        ) {
            Err(Error::Leakage) => {}
            other => panic!("expected leakage error, got {other:?}"),
        }
        // The guard applies whenever a plan is supplied, plug-in included.
        match calibrate(&model, &data, Some(&plan), &spec, CalibrationMethod::Plugin) {
            Err(Error::Leakage) => {}
            other => panic!("expected leakage error, got {other:?}"),
        }
    }

    #[test]
    fn conformal_min_class_rank_example() {
        // m = 9 per class, alpha = 0.1: kappa = floor(1.0) = 1, so the
        // threshold is the smallest class score.
        let scores: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        let cal = sample(&scores);
        assert_eq!(conformal_threshold(&cal, 0.1).unwrap(), Threshold::Finite(0.1));
    }

    #[test]
    fn empty_scores_are_rejected() {
        let empty = ScoreSample::from_scores(vec![]).unwrap();
        assert!(plugin_threshold_value(&empty, 0.1).is_err());
        assert!(conformal_threshold(&empty, 0.1).is_err());
        assert!(conformal_p_value(0.5, &empty).is_err());
    }

    #[test]
    fn score_sample_validation() {
        assert!(ScoreSample::from_scores(vec![0.5, 1.2]).is_err());
        assert!(ScoreSample::from_scores(vec![f64::NAN]).is_err());
        assert!(ScoreSample::new(vec![0.5], Some(vec![0, 1]), None).is_err());
    }
}
