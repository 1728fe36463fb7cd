//! Command implementations. Each writes its outputs plus the resolved
//! `run_config.txt` into the output directory.

use std::path::{Path, PathBuf};

use labelset::calibration::{calibrate, CalibrationMethod};
use labelset::completion::{
    accretive_complete, baseline_fill, default_iteration_cap, empirical_ambiguity,
    total_coverage_complete, PosteriorMatrix,
};
use labelset::dataset::{split, LabeledDataset, SplitPlan};
use labelset::estimators::{fit_kernel, fit_knn, fit_logistic, Bandwidth, KernelMode};
use labelset::evaluation::evaluate;
use labelset::ingest;
use labelset::oracle::{self, BoundingBox, GaussianMixtureSpec};
use labelset::persist::{FittedModel, ModelArtifact, ThresholdArtifact};
use labelset::predict::{posterior_rows, predict_set, PosteriorModel, PredictionSet};
use labelset::rng;
use labelset::threshold::{CoverageSpec, Threshold, ThresholdVector};

use crate::args::{
    CalibrateArgs, CompleteArg, CoverageModeArg, EstimatorKind, EvaluateArgs, FitArgs,
    KernelModeArg, MethodArg, OracleArgs, PredictArgs,
};
use crate::config::RunConfig;
use crate::error::CliError;

fn write_output(dir: &Path, name: &str, content: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, content)
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn parse_comma_floats(raw: &str, what: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| CliError::validation(format!("unreadable {what} value {tok:?}")))
        })
        .collect()
}

fn resolve_alphas(raw: &str, mode: CoverageModeArg, k: usize) -> Result<CoverageSpec, CliError> {
    let values = parse_comma_floats(raw, "alpha")?;
    match mode {
        CoverageModeArg::Total => {
            if values.len() != 1 {
                return Err(CliError::validation(format!(
                    "total coverage takes one alpha, got {}",
                    values.len()
                )));
            }
            Ok(CoverageSpec::total(values[0])?)
        }
        CoverageModeArg::Class => {
            let values = if values.len() == 1 {
                vec![values[0]; k]
            } else {
                values
            };
            if values.len() != k {
                return Err(CliError::validation(format!(
                    "{} alpha values for {k} classes",
                    values.len()
                )));
            }
            Ok(CoverageSpec::class_specific(values)?)
        }
    }
}

fn split_if_requested(
    data: &LabeledDataset,
    split_frac: Option<f64>,
    seed: u64,
) -> Result<Option<SplitPlan>, CliError> {
    match split_frac {
        Some(fraction) => Ok(Some(split(data, seed, fraction)?)),
        None => Ok(None),
    }
}

pub fn cmd_fit(args: &FitArgs) -> Result<(), CliError> {
    let parsed = ingest::read_labeled_csv(&args.data, &args.label_col)?;
    let plan = split_if_requested(&parsed.dataset, args.split_frac, args.seed)?;
    let fit_data = match &plan {
        Some(plan) => {
            if plan.fit().is_empty() {
                return Err(CliError::validation(
                    "split leaves no rows to fit on; raise --split-frac",
                ));
            }
            parsed.dataset.subset(plan.fit())?
        }
        None => parsed.dataset.clone(),
    };

    let model = match args.estimator {
        EstimatorKind::Knn => {
            let k = args
                .k
                .ok_or_else(|| CliError::validation("--k is required for the knn estimator"))?;
            FittedModel::Knn(fit_knn(&fit_data, k)?)
        }
        EstimatorKind::Kernel => {
            let bandwidth = match args.bandwidth.trim() {
                "auto" => Bandwidth::Auto,
                "auto-pooled" => Bandwidth::AutoPooled,
                other => Bandwidth::Explicit(parse_comma_floats(other, "bandwidth")?),
            };
            let mode = match args.kernel_mode {
                KernelModeArg::Regression => KernelMode::Regression,
                KernelModeArg::ClassConditional => KernelMode::ClassConditional,
            };
            FittedModel::Kernel(fit_kernel(&fit_data, bandwidth, mode)?)
        }
        EstimatorKind::Logistic => {
            let model = fit_logistic(&fit_data, args.lambda, args.max_iter, args.tolerance)?;
            let diag = model.diagnostics();
            if !diag.converged {
                eprintln!(
                    "warning: gradient descent stopped after {} iterations with gradient norm {:.3e}",
                    diag.iterations, diag.final_gradient_norm
                );
            }
            FittedModel::Logistic(model)
        }
    };

    let artifact = ModelArtifact::new(model, parsed.class_names.clone())?;
    write_output(&args.out, "model.txt", &artifact.to_text())?;

    let mut config = RunConfig::new("fit");
    config.push("data", args.data.display());
    config.push("label-col", &args.label_col);
    config.push(
        "estimator",
        match args.estimator {
            EstimatorKind::Knn => "knn",
            EstimatorKind::Kernel => "kernel",
            EstimatorKind::Logistic => "logistic",
        },
    );
    config.push_opt("k", args.k);
    if args.estimator == EstimatorKind::Kernel {
        config.push("bandwidth", &args.bandwidth);
        config.push(
            "kernel-mode",
            match args.kernel_mode {
                KernelModeArg::Regression => "regression",
                KernelModeArg::ClassConditional => "class-conditional",
            },
        );
    }
    if args.estimator == EstimatorKind::Logistic {
        config.push("lambda", args.lambda);
        config.push("max-iter", args.max_iter);
        config.push("tolerance", args.tolerance);
    }
    config.push_opt("split-frac", args.split_frac);
    config.push("seed", args.seed);
    config.push("out", args.out.display());
    write_output(&args.out, "run_config.txt", &config.to_text())
}

pub fn cmd_calibrate(args: &CalibrateArgs) -> Result<(), CliError> {
    let artifact = ModelArtifact::load(&args.model)?;
    let parsed =
        ingest::read_labeled_csv_with_classes(&args.data, &args.label_col, &artifact.class_names)?;
    let data = parsed.dataset;
    let spec = resolve_alphas(&args.alpha, args.coverage_mode, data.class_count())?;

    let method = match args.method {
        MethodArg::Plugin => CalibrationMethod::Plugin,
        MethodArg::Conformal => CalibrationMethod::SplitConformal,
    };
    if method == CalibrationMethod::SplitConformal && args.split_frac.is_none() {
        return Err(CliError::validation(
            "--split-frac is required for split-conformal calibration",
        ));
    }
    let plan = split_if_requested(&data, args.split_frac, args.seed)?;
    let calibrated = calibrate(&artifact.model, &data, plan.as_ref(), &spec, method)?;
    let mut threshold_artifact = ThresholdArtifact::from_calibrated(&calibrated);

    match args.complete {
        CompleteArg::None => {}
        CompleteArg::Fill => {
            return Err(CliError::validation(
                "baseline fill applies at predict/evaluate time, not during calibration",
            ))
        }
        CompleteArg::Accretive => {
            if args.coverage_mode != CoverageModeArg::Class {
                return Err(CliError::validation(
                    "accretive completion needs class-specific thresholds",
                ));
            }
            // Plug-in completion uses every scored row; split-conformal
            // restricts the ambiguity functional to the calibration half.
            let rows_subset: Option<Vec<usize>> =
                plan.as_ref().map(|p| p.calibration().to_vec());
            let rows = posterior_rows(&artifact.model, &data, rows_subset.as_deref())?;
            let matrix = PosteriorMatrix::from_rows(&rows)?;
            let cap = default_iteration_cap(data.class_count(), args.epsilon);
            let initial_ambiguity =
                empirical_ambiguity(&matrix, &threshold_artifact.thresholds)?;
            let (completed, trace) = accretive_complete(
                &threshold_artifact.thresholds,
                &matrix,
                args.epsilon,
                cap,
            )?;
            write_output(&args.out, "accretive_trace.csv", &trace.to_csv(initial_ambiguity))?;
            threshold_artifact.thresholds = completed;
            threshold_artifact.notes.push(format!(
                "completed: accretive epsilon={} steps={} reason={}",
                args.epsilon,
                trace.steps.len(),
                trace.termination.as_str()
            ));
        }
        CompleteArg::Total => {
            if args.coverage_mode != CoverageModeArg::Total {
                return Err(CliError::validation(
                    "single-threshold completion needs total coverage mode",
                ));
            }
            if let ThresholdVector::Total(Threshold::Finite(t)) = threshold_artifact.thresholds {
                let capped = total_coverage_complete(t, data.class_count())?;
                threshold_artifact.thresholds = ThresholdVector::total(capped)?;
                threshold_artifact
                    .notes
                    .push(format!("completed: total min(1/K, t) = {capped}"));
            }
        }
    }

    write_output(&args.out, "thresholds.txt", &threshold_artifact.to_text())?;

    let mut config = RunConfig::new("calibrate");
    config.push("data", args.data.display());
    config.push("label-col", &args.label_col);
    config.push("model", args.model.display());
    config.push(
        "coverage-mode",
        match args.coverage_mode {
            CoverageModeArg::Total => "total",
            CoverageModeArg::Class => "class",
        },
    );
    config.push("alpha", &args.alpha);
    config.push(
        "method",
        match args.method {
            MethodArg::Plugin => "plugin",
            MethodArg::Conformal => "conformal",
        },
    );
    config.push_opt("split-frac", args.split_frac);
    config.push("seed", args.seed);
    config.push("complete", complete_name(args.complete));
    if args.complete == CompleteArg::Accretive {
        config.push("epsilon", args.epsilon);
    }
    config.push("out", args.out.display());
    write_output(&args.out, "run_config.txt", &config.to_text())
}

fn complete_name(complete: CompleteArg) -> &'static str {
    match complete {
        CompleteArg::None => "none",
        CompleteArg::Fill => "fill",
        CompleteArg::Accretive => "accretive",
        CompleteArg::Total => "total",
    }
}

/// Prediction sets for every row, honoring the fill option.
fn predict_rows(
    model: &FittedModel,
    thresholds: &ThresholdVector,
    rows: impl Iterator<Item = Vec<f64>>,
    fill: bool,
) -> Result<Vec<PredictionSet>, CliError> {
    let mut sets = Vec::new();
    for row in rows {
        let set = if fill {
            baseline_fill(model, thresholds, &row)?
        } else {
            predict_set(model, thresholds, &row)?
        };
        sets.push(set);
    }
    Ok(sets)
}

/// `row,members,set_size,bitmask` with members as semicolon-joined sorted
/// class names; an empty set is an empty members field with bitmask 0.
fn predictions_csv(sets: &[PredictionSet], class_names: &[String]) -> String {
    let mut out = String::from("row,members,set_size,bitmask\n");
    for (i, set) in sets.iter().enumerate() {
        let members: Vec<String> = set
            .members()
            .iter()
            .map(|&y| class_names[y - 1].clone())
            .collect();
        out.push_str(&format!(
            "{i},{},{},{}\n",
            labelset::evaluation::csv_field(&members.join(";")),
            set.len(),
            set.bitmask()
        ));
    }
    out
}

fn check_thresholds_compatible(
    thresholds: &ThresholdVector,
    class_count: usize,
) -> Result<(), CliError> {
    if class_count > 128 {
        return Err(CliError::validation(format!(
            "prediction CSV bitmasks support at most 128 classes, model has {class_count}"
        )));
    }
    if let Some(k) = thresholds.class_count() {
        if k != class_count {
            return Err(CliError::validation(format!(
                "thresholds cover {k} classes but the model has {class_count}"
            )));
        }
    }
    Ok(())
}

pub fn cmd_predict(args: &PredictArgs) -> Result<(), CliError> {
    let artifact = ModelArtifact::load(&args.model)?;
    let thresholds = ThresholdArtifact::load(&args.thresholds)?;
    check_thresholds_compatible(&thresholds.thresholds, artifact.model.class_count())?;
    if !matches!(args.complete, CompleteArg::None | CompleteArg::Fill) {
        return Err(CliError::validation(
            "predict supports --complete none or fill",
        ));
    }

    let features = ingest::read_features_csv(&args.data, args.label_col.as_deref())?;
    if features.dim != artifact.model.feature_dim() {
        return Err(CliError::validation(format!(
            "data has {} feature columns but the model expects {}",
            features.dim,
            artifact.model.feature_dim()
        )));
    }
    let sets = predict_rows(
        &artifact.model,
        &thresholds.thresholds,
        (0..features.n).map(|i| features.row(i).to_vec()),
        args.complete == CompleteArg::Fill,
    )?;
    write_output(
        &args.out,
        "predictions.csv",
        &predictions_csv(&sets, &artifact.class_names),
    )?;

    let mut config = RunConfig::new("predict");
    config.push("data", args.data.display());
    config.push_opt("label-col", args.label_col.as_ref());
    config.push("model", args.model.display());
    config.push("thresholds", args.thresholds.display());
    config.push("complete", complete_name(args.complete));
    config.push("out", args.out.display());
    write_output(&args.out, "run_config.txt", &config.to_text())
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let artifact = ModelArtifact::load(&args.model)?;
    let thresholds = ThresholdArtifact::load(&args.thresholds)?;
    check_thresholds_compatible(&thresholds.thresholds, artifact.model.class_count())?;
    if !matches!(args.complete, CompleteArg::None | CompleteArg::Fill) {
        return Err(CliError::validation(
            "evaluate supports --complete none or fill",
        ));
    }

    let parsed =
        ingest::read_labeled_csv_with_classes(&args.data, &args.label_col, &artifact.class_names)?;
    let data = parsed.dataset;
    if data.dim() != artifact.model.feature_dim() {
        return Err(CliError::validation(format!(
            "data has {} feature columns but the model expects {}",
            data.dim(),
            artifact.model.feature_dim()
        )));
    }
    let sets = predict_rows(
        &artifact.model,
        &thresholds.thresholds,
        (0..data.n()).map(|i| data.row(i).to_vec()),
        args.complete == CompleteArg::Fill,
    )?;
    let report = evaluate(&sets, data.labels(), data.class_count())?;

    write_output(
        &args.out,
        "predictions.csv",
        &predictions_csv(&sets, &artifact.class_names),
    )?;
    write_output(&args.out, "metrics.csv", &report.metrics_csv(&artifact.class_names))?;
    write_output(
        &args.out,
        "cooccurrence.csv",
        &report.co_occurrence_csv(&artifact.class_names),
    )?;
    write_output(&args.out, "report.txt", &report.to_text(&artifact.class_names))?;

    let mut config = RunConfig::new("evaluate");
    config.push("data", args.data.display());
    config.push("label-col", &args.label_col);
    config.push("model", args.model.display());
    config.push("thresholds", args.thresholds.display());
    config.push("complete", complete_name(args.complete));
    config.push("out", args.out.display());
    write_output(&args.out, "run_config.txt", &config.to_text())
}

pub fn cmd_oracle(args: &OracleArgs) -> Result<(), CliError> {
    let spec = GaussianMixtureSpec::by_name(&args.preset).ok_or_else(|| {
        CliError::validation(format!(
            "unknown preset {:?}; available: {}",
            args.preset,
            GaussianMixtureSpec::preset_names().join(", ")
        ))
    })?;
    if !(args.coverage > 0.0 && args.coverage < 1.0) {
        return Err(CliError::validation(format!(
            "coverage must lie strictly in (0, 1), got {}",
            args.coverage
        )));
    }
    let alpha = 1.0 - args.coverage;
    let k = spec.class_count();

    let mut summary = String::new();
    summary.push_str(&format!(
        "preset {} (K={k}, d={})\ncoverage {} (alpha {alpha})\n",
        args.preset,
        spec.dim(),
        args.coverage
    ));

    // Ideal thresholds at the requested coverage.
    let (mut thresholds, alphas): (ThresholdVector, Vec<f64>) = match args.coverage_mode {
        CoverageModeArg::Class => {
            let values: Vec<f64> = (1..=k)
                .map(|y| {
                    oracle::class_threshold(
                        &spec,
                        y,
                        alpha,
                        args.mc,
                        rng::derive(args.seed, "oracle-class-threshold", y as u64),
                    )
                })
                .collect::<Result<_, _>>()?;
            summary.push_str(&format!("class thresholds {values:?}\n"));
            (ThresholdVector::per_class(values)?, vec![alpha; k])
        }
        CoverageModeArg::Total => {
            let value = oracle::total_threshold(
                &spec,
                alpha,
                args.mc,
                rng::derive(args.seed, "oracle-total-threshold", 0),
            )?;
            summary.push_str(&format!("total threshold {value}\n"));
            (ThresholdVector::total(value)?, vec![alpha])
        }
    };

    let mut method = String::from("oracle");
    match args.complete {
        CompleteArg::None => {}
        CompleteArg::Fill => {
            return Err(CliError::validation(
                "baseline fill applies at predict/evaluate time, not to oracle thresholds",
            ))
        }
        CompleteArg::Accretive => {
            if args.coverage_mode != CoverageModeArg::Class {
                return Err(CliError::validation(
                    "accretive completion needs class-specific thresholds",
                ));
            }
            let matrix = oracle::sample_posterior_matrix(
                &spec,
                args.mc,
                rng::derive(args.seed, "oracle-score-matrix", 0),
            )?;
            let initial_ambiguity = empirical_ambiguity(&matrix, &thresholds)?;
            let cap = default_iteration_cap(k, args.epsilon);
            let (completed, trace) =
                accretive_complete(&thresholds, &matrix, args.epsilon, cap)?;
            write_output(&args.out, "accretive_trace.csv", &trace.to_csv(initial_ambiguity))?;
            summary.push_str(&format!(
                "accretive: epsilon={} steps={} reason={}\n",
                args.epsilon,
                trace.steps.len(),
                trace.termination.as_str()
            ));
            thresholds = completed;
            method = "oracle+accretive".to_string();
        }
        CompleteArg::Total => {
            if args.coverage_mode != CoverageModeArg::Total {
                return Err(CliError::validation(
                    "single-threshold completion needs total coverage mode",
                ));
            }
            if let ThresholdVector::Total(Threshold::Finite(t)) = thresholds {
                let capped = total_coverage_complete(t, k)?;
                thresholds = ThresholdVector::total(capped)?;
                summary.push_str(&format!("total completion min(1/K, t) = {capped}\n"));
                method = "oracle+total".to_string();
            }
        }
    }

    let final_entries: Vec<Threshold> = (1..=k).map(|y| thresholds.entry(y)).collect();
    summary.push_str(&format!("final thresholds {final_entries:?}\n"));

    let ambiguity = oracle::ambiguity(
        &spec,
        &thresholds,
        args.mc,
        rng::derive(args.seed, "oracle-ambiguity", 0),
    )?;
    let null_probability = oracle::null_probability(
        &spec,
        &thresholds,
        args.mc,
        rng::derive(args.seed, "oracle-null", 0),
    )?;
    summary.push_str(&format!("oracle ambiguity {ambiguity}\n"));
    summary.push_str(&format!("oracle null probability {null_probability}\n"));

    let mut artifact = ThresholdArtifact::new(thresholds.clone(), method);
    artifact.alphas = Some(alphas);
    write_output(&args.out, "thresholds.txt", &artifact.to_text())?;

    if spec.dim() == 2 && args.raster_res > 0 {
        let bounds = parse_comma_floats(&args.raster_box, "raster-box")?;
        if bounds.len() != 4 {
            return Err(CliError::validation(
                "--raster-box needs four values: x0,x1,y0,y1",
            ));
        }
        let bbox = BoundingBox::new(bounds[0], bounds[1], bounds[2], bounds[3])?;
        let raster = oracle::region_raster(&spec, &thresholds, &bbox, args.raster_res)?;
        write_output(&args.out, "raster.csv", &raster.to_csv())?;
        summary.push_str(&format!(
            "raster {0}x{0} over [{1}, {2}] x [{3}, {4}], {5} empty cells\n",
            args.raster_res,
            bounds[0],
            bounds[1],
            bounds[2],
            bounds[3],
            raster.cells.iter().filter(|c| c.is_empty()).count()
        ));
    }

    if let Some(grid_raw) = &args.curve {
        let grid = parse_comma_floats(grid_raw, "curve")?;
        let curve = oracle::coverage_curve(
            &spec,
            &grid,
            args.mc,
            rng::derive(args.seed, "oracle-curve", 0),
        )?;
        write_output(&args.out, "curve.csv", &curve.to_csv())?;
    }

    write_output(&args.out, "summary.txt", &summary)?;

    let mut config = RunConfig::new("oracle");
    config.push("preset", &args.preset);
    config.push("coverage", args.coverage);
    config.push(
        "coverage-mode",
        match args.coverage_mode {
            CoverageModeArg::Total => "total",
            CoverageModeArg::Class => "class",
        },
    );
    config.push("complete", complete_name(args.complete));
    if args.complete == CompleteArg::Accretive {
        config.push("epsilon", args.epsilon);
    }
    config.push("mc", args.mc);
    config.push("seed", args.seed);
    config.push("raster-box", &args.raster_box);
    config.push("raster-res", args.raster_res);
    config.push_opt("curve", args.curve.as_ref());
    config.push("out", args.out.display());
    write_output(&args.out, "run_config.txt", &config.to_text())
}

pub fn load_run_config(path: &PathBuf) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    RunConfig::from_text(&text)
}
