//! Set-valued classification with guaranteed coverage.
//!
//! A set-valued classifier maps a feature vector to a *subset* of the class
//! labels, so genuinely ambiguous inputs can receive several plausible
//! labels instead of one forced guess. The classifiers here are level sets
//! of estimated class posteriors, `H(x) = { y : p(y|x) >= t_y }`, with the
//! cut-offs `t_y` calibrated to guarantee coverage:
//!
//! * total coverage `P{Y in H(X)} >= 1 - alpha`, or
//! * class-specific coverage `P{Y in H(X) | Y = y} >= 1 - alpha_y`,
//!
//! while keeping the *ambiguity* `E|H(X)|` as small as possible.
//!
//! The pieces:
//!
//! * [`dataset`] / [`ingest`]: labeled data, seeded fit/calibration splits,
//!   CSV loading.
//! * [`estimators`]: posterior estimators: k-NN, Gaussian-kernel
//!   (Nadaraya-Watson or class-conditional KDE), and ridge-penalized
//!   multinomial logistic regression.
//! * [`calibration`]: plug-in empirical-quantile thresholds, and
//!   split-conformal thresholds with distribution-free finite-sample
//!   coverage.
//! * [`completion`]: removing empty predictions: argmax baseline fill, the
//!   greedy accretive threshold completion, and the single-threshold
//!   `min(1/K, t)` rule.
//! * [`oracle`]: Gaussian-mixture ground truths with exact posteriors, for
//!   computing ideal thresholds, ambiguity, coverage curves, and
//!   classification-region rasters by seeded Monte-Carlo.
//! * [`evaluation`]: coverage/ambiguity reports, set-size histograms, and
//!   label co-occurrence matrices.
//! * [`persist`]: versioned text artifacts for models and thresholds.
//!
//! Everything is deterministic given its seed; random streams are ChaCha20
//! and independent of thread count (cap workers with `LABELSET_THREADS`).

pub mod calibration;
pub mod completion;
pub mod dataset;
pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod ingest;
pub mod oracle;
pub mod persist;
pub mod predict;
pub mod rng;
pub mod threshold;

pub use calibration::{
    calibrate, conformal_p_value, conformal_threshold, plugin_class_thresholds,
    plugin_total_threshold, CalibratedThresholds, CalibrationMethod, ScoreSample,
};
pub use completion::{
    accretive_complete, baseline_fill, default_iteration_cap, empirical_ambiguity,
    total_coverage_complete, AccretiveTrace, PosteriorMatrix, TerminationReason,
};
pub use dataset::{split, Fingerprint, LabeledDataset, SplitPlan};
pub use error::{Error, Result};
pub use evaluation::{evaluate, size_histogram, EvaluationReport};
pub use oracle::GaussianMixtureSpec;
pub use predict::{predict_set, PosteriorModel, PredictionSet};
pub use threshold::{CoverageMode, CoverageSpec, Threshold, ThresholdVector};
