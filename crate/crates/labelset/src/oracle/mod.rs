//! Ground-truth Gaussian mixtures with exact posteriors.
//!
//! These distributions make the ideal level-set classifier computable: the
//! posterior `p(y|x)` is an exact density ratio, and thresholds, ambiguity,
//! null-region mass, coverage curves, and classification-region rasters are
//! estimated by seeded Monte-Carlo. All sampling uses platform-stable
//! per-chunk ChaCha20 streams, so results are reproducible and independent
//! of the worker-thread count.

mod mvn;

use crate::completion::PosteriorMatrix;
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::predict::{PosteriorModel, PredictionSet};
use crate::rng;
use crate::threshold::ThresholdVector;

use mvn::CholeskyFactor;
use rand::Rng;

const HALF_LN_TAU: f64 = 0.918_938_533_204_672_7; // ln(2*pi)/2
const CHUNK: usize = 8192;

/// A K-component Gaussian mixture: priors, means, and SPD covariances.
#[derive(Debug, Clone)]
pub struct GaussianMixtureSpec {
    priors: Vec<f64>,
    means: Vec<Vec<f64>>,
    covariances: Vec<Vec<f64>>,
    chol: Vec<CholeskyFactor>,
    log_norm: Vec<f64>,
    dim: usize,
}

impl GaussianMixtureSpec {
    pub fn new(
        priors: Vec<f64>,
        means: Vec<Vec<f64>>,
        covariances: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let k = priors.len();
        if k < 2 {
            return Err(Error::invalid_argument("need at least two components"));
        }
        if means.len() != k || covariances.len() != k {
            return Err(Error::invalid_argument(
                "priors, means, and covariances must have equal lengths",
            ));
        }
        if priors.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(Error::invalid_argument("priors must be nonnegative"));
        }
        let total: f64 = priors.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid_argument(format!(
                "priors sum to {total}, expected 1"
            )));
        }
        let dim = means[0].len();
        if dim == 0 {
            return Err(Error::invalid_argument("means must be nonempty"));
        }
        let mut chol = Vec::with_capacity(k);
        let mut log_norm = Vec::with_capacity(k);
        for y in 0..k {
            if means[y].len() != dim {
                return Err(Error::invalid_argument("means must share one dimension"));
            }
            if means[y].iter().any(|m| !m.is_finite()) {
                return Err(Error::invalid_argument("means must be finite"));
            }
            let factor = CholeskyFactor::new(&covariances[y], dim)?;
            log_norm.push(-(dim as f64) * HALF_LN_TAU - factor.half_log_det());
            chol.push(factor);
        }
        Ok(GaussianMixtureSpec {
            priors,
            means,
            covariances,
            chol,
            log_norm,
            dim,
        })
    }

    /// 1-D two-class preset: priors (0.95, 0.05), means -1 and 1, unit
    /// variances. The dominant class makes total-coverage control starve the
    /// minority class.
    pub fn example1() -> Self {
        GaussianMixtureSpec::new(
            vec![0.95, 0.05],
            vec![vec![-1.0], vec![1.0]],
            vec![vec![1.0], vec![1.0]],
        )
        .expect("preset is valid")
    }

    /// 2-D three-class preset with uniform priors, means (0, 3.5), (-2, 0),
    /// (0, -2) and covariances I, 2I, diag(5, 1). Class 1 sits apart while
    /// classes 2 and 3 overlap; moderate class-specific coverage targets
    /// leave a visible null region between the blobs.
    pub fn example3() -> Self {
        GaussianMixtureSpec::new(
            vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            vec![vec![0.0, 3.5], vec![-2.0, 0.0], vec![0.0, -2.0]],
            vec![
                vec![1.0, 0.0, 0.0, 1.0],
                vec![2.0, 0.0, 0.0, 2.0],
                vec![5.0, 0.0, 0.0, 1.0],
            ],
        )
        .expect("preset is valid")
    }

    /// Look up a built-in preset by name (case-insensitive).
    pub fn by_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "example1" => Some(Self::example1()),
            "example3" => Some(Self::example3()),
            _ => None,
        }
    }

    pub fn preset_names() -> &'static [&'static str] {
        &["example1", "example3"]
    }

    pub fn class_count(&self) -> usize {
        self.priors.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn covariances(&self) -> &[Vec<f64>] {
        &self.covariances
    }

    /// Log density of component `y` (1-based) at `x`.
    pub fn log_class_density(&self, y: usize, x: &[f64]) -> f64 {
        let mut z: Vec<f64> = x
            .iter()
            .zip(&self.means[y - 1])
            .map(|(a, b)| a - b)
            .collect();
        self.chol[y - 1].solve_lower(&mut z);
        self.log_norm[y - 1] - 0.5 * z.iter().map(|v| v * v).sum::<f64>()
    }

    /// Exact posterior `p(y|x) = pi_y p_y(x) / sum_l pi_l p_l(x)`, computed
    /// in the log domain.
    pub fn posterior_at(&self, x: &[f64]) -> Vec<f64> {
        let k = self.class_count();
        let mut scores: Vec<f64> = (1..=k)
            .map(|y| {
                let lp = self.priors[y - 1].ln(); // -inf for zero priors
                lp + self.log_class_density(y, x)
            })
            .collect();
        let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for s in scores.iter_mut() {
            *s = (*s - m).exp();
            sum += *s;
        }
        for s in scores.iter_mut() {
            *s /= sum;
        }
        scores
    }

    fn draw_label<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (y, &p) in self.priors.iter().enumerate() {
            acc += p;
            if u < acc {
                return y + 1;
            }
        }
        self.priors.len()
    }

    fn draw_feature<R: Rng + ?Sized>(&self, y: usize, rng: &mut R, out: &mut [f64]) {
        let z: Vec<f64> = (0..self.dim).map(|_| rng::standard_normal(rng)).collect();
        self.chol[y - 1].mul_lower(&z, out);
        for (v, m) in out.iter_mut().zip(&self.means[y - 1]) {
            *v += m;
        }
    }

    /// Draw `n` labeled samples: labels from the priors, features from the
    /// class Gaussians. Reproducible from the seed.
    pub fn sample(&self, n: usize, seed: u64) -> Result<LabeledDataset> {
        if n == 0 {
            return Err(Error::invalid_argument("sample size must be positive"));
        }
        let chunks = rng::chunked_map(n, CHUNK, rng::thread_cap(), |chunk, range| {
            let mut rng = rng::stream(seed, "mixture-sample", 0, chunk as u64);
            let mut features = Vec::with_capacity(range.len() * self.dim);
            let mut labels = Vec::with_capacity(range.len());
            let mut buf = vec![0.0; self.dim];
            for _ in range {
                let y = self.draw_label(&mut rng);
                self.draw_feature(y, &mut rng, &mut buf);
                features.extend_from_slice(&buf);
                labels.push(y);
            }
            (features, labels)
        });
        let mut features = Vec::with_capacity(n * self.dim);
        let mut labels = Vec::with_capacity(n);
        for (f, l) in chunks {
            features.extend(f);
            labels.extend(l);
        }
        LabeledDataset::new(features, self.dim, labels, self.class_count())
    }

    /// Draw `n` features from the class-`y` conditional, row-major.
    pub fn sample_class(&self, y: usize, n: usize, seed: u64) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::invalid_argument("sample size must be positive"));
        }
        if y < 1 || y > self.class_count() {
            return Err(Error::invalid_argument(format!(
                "class {y} outside 1..={}",
                self.class_count()
            )));
        }
        let chunks = rng::chunked_map(n, CHUNK, rng::thread_cap(), |chunk, range| {
            let mut rng = rng::stream(seed, "mixture-sample-class", y as u64, chunk as u64);
            let mut features = Vec::with_capacity(range.len() * self.dim);
            let mut buf = vec![0.0; self.dim];
            for _ in range {
                self.draw_feature(y, &mut rng, &mut buf);
                features.extend_from_slice(&buf);
            }
            features
        });
        Ok(chunks.into_iter().flatten().collect())
    }
}

impl PosteriorModel for GaussianMixtureSpec {
    fn class_count(&self) -> usize {
        self.priors.len()
    }

    fn feature_dim(&self) -> usize {
        self.dim
    }

    fn posterior(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::invalid_argument(format!(
                "query has {} dimensions, mixture has {}",
                x.len(),
                self.dim
            )));
        }
        Ok(self.posterior_at(x))
    }
}

/// Lower empirical quantile: the value of rank `ceil(alpha * n)` (1-based)
/// in ascending order. Matches the `sup { t : coverage >= 1 - alpha }`
/// direction of the plug-in rule.
fn lower_quantile(mut scores: Vec<f64>, alpha: f64) -> f64 {
    scores.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    let n = scores.len();
    let rank = ((alpha * n as f64).ceil() as usize).clamp(1, n);
    scores[rank - 1]
}

fn check_mc_args(alpha: f64, n_mc: usize) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid_argument(format!(
            "alpha must lie strictly in (0, 1), got {alpha}"
        )));
    }
    if n_mc < 1000 {
        return Err(Error::invalid_argument(format!(
            "Monte-Carlo size must be at least 1000, got {n_mc}"
        )));
    }
    Ok(())
}

/// Ideal class-specific cut-off `G_y^{-1}(alpha)`: the empirical
/// `alpha`-quantile of `p(y|X)` over `n_mc` class-`y` conditional draws.
pub fn class_threshold(
    spec: &GaussianMixtureSpec,
    class: usize,
    alpha: f64,
    n_mc: usize,
    seed: u64,
) -> Result<f64> {
    check_mc_args(alpha, n_mc)?;
    if class < 1 || class > spec.class_count() {
        return Err(Error::invalid_argument(format!(
            "class {class} outside 1..={}",
            spec.class_count()
        )));
    }
    let chunks = rng::chunked_map(n_mc, CHUNK, rng::thread_cap(), |chunk, range| {
        let mut rng = rng::stream(seed, "class-threshold", class as u64, chunk as u64);
        let mut buf = vec![0.0; spec.dim()];
        range
            .map(|_| {
                spec.draw_feature(class, &mut rng, &mut buf);
                spec.posterior_at(&buf)[class - 1]
            })
            .collect::<Vec<f64>>()
    });
    Ok(lower_quantile(chunks.into_iter().flatten().collect(), alpha))
}

/// Ideal total-coverage cut-off: the empirical `alpha`-quantile of `p(Y|X)`
/// over joint draws `(X, Y)`.
pub fn total_threshold(
    spec: &GaussianMixtureSpec,
    alpha: f64,
    n_mc: usize,
    seed: u64,
) -> Result<f64> {
    check_mc_args(alpha, n_mc)?;
    let chunks = rng::chunked_map(n_mc, CHUNK, rng::thread_cap(), |chunk, range| {
        let mut rng = rng::stream(seed, "total-threshold", 0, chunk as u64);
        let mut buf = vec![0.0; spec.dim()];
        range
            .map(|_| {
                let y = spec.draw_label(&mut rng);
                spec.draw_feature(y, &mut rng, &mut buf);
                spec.posterior_at(&buf)[y - 1]
            })
            .collect::<Vec<f64>>()
    });
    Ok(lower_quantile(chunks.into_iter().flatten().collect(), alpha))
}

/// Monte-Carlo ambiguity `A(t) = sum_y P\{p(y|X) >= t_y\}` under the
/// marginal of `X`.
pub fn ambiguity(
    spec: &GaussianMixtureSpec,
    thresholds: &ThresholdVector,
    n_mc: usize,
    seed: u64,
) -> Result<f64> {
    if n_mc < 1000 {
        return Err(Error::invalid_argument("Monte-Carlo size must be at least 1000"));
    }
    let entries = thresholds.entries_for(spec.class_count())?;
    let chunks = rng::chunked_map(n_mc, CHUNK, rng::thread_cap(), |chunk, range| {
        let mut rng = rng::stream(seed, "ambiguity", 0, chunk as u64);
        let mut buf = vec![0.0; spec.dim()];
        let mut total = 0usize;
        for _ in range {
            let y = spec.draw_label(&mut rng);
            spec.draw_feature(y, &mut rng, &mut buf);
            let probs = spec.posterior_at(&buf);
            total += entries
                .iter()
                .zip(&probs)
                .filter(|(t, &p)| t.admits(p))
                .count();
        }
        total
    });
    Ok(chunks.into_iter().sum::<usize>() as f64 / n_mc as f64)
}

/// Monte-Carlo probability of the null region `\{x : H(x) = empty\}`.
pub fn null_probability(
    spec: &GaussianMixtureSpec,
    thresholds: &ThresholdVector,
    n_mc: usize,
    seed: u64,
) -> Result<f64> {
    if n_mc < 1000 {
        return Err(Error::invalid_argument("Monte-Carlo size must be at least 1000"));
    }
    let entries = thresholds.entries_for(spec.class_count())?;
    let chunks = rng::chunked_map(n_mc, CHUNK, rng::thread_cap(), |chunk, range| {
        let mut rng = rng::stream(seed, "null-probability", 0, chunk as u64);
        let mut buf = vec![0.0; spec.dim()];
        let mut empties = 0usize;
        for _ in range {
            let y = spec.draw_label(&mut rng);
            spec.draw_feature(y, &mut rng, &mut buf);
            let probs = spec.posterior_at(&buf);
            if entries.iter().zip(&probs).all(|(t, &p)| !t.admits(p)) {
                empties += 1;
            }
        }
        empties
    });
    Ok(chunks.into_iter().sum::<usize>() as f64 / n_mc as f64)
}

/// Posterior rows of `n` marginal draws, as a matrix suitable for the
/// empirical-ambiguity functional and accretive completion.
pub fn sample_posterior_matrix(
    spec: &GaussianMixtureSpec,
    n: usize,
    seed: u64,
) -> Result<PosteriorMatrix> {
    if n == 0 {
        return Err(Error::invalid_argument("sample size must be positive"));
    }
    let chunks = rng::chunked_map(n, CHUNK, rng::thread_cap(), |chunk, range| {
        let mut rng = rng::stream(seed, "marginal-scores", 0, chunk as u64);
        let mut buf = vec![0.0; spec.dim()];
        let mut values = Vec::with_capacity(range.len() * spec.class_count());
        for _ in range {
            let y = spec.draw_label(&mut rng);
            spec.draw_feature(y, &mut rng, &mut buf);
            values.extend(spec.posterior_at(&buf));
        }
        values
    });
    PosteriorMatrix::new(chunks.into_iter().flatten().collect(), spec.class_count())
}

/// One row of a coverage curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub total_coverage: f64,
    pub class_coverage: Vec<f64>,
}

/// Class-specific coverage as a function of total coverage.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageCurve {
    pub rows: Vec<CurveRow>,
}

impl CoverageCurve {
    /// CSV export: `total_coverage,cov_1..cov_K`.
    pub fn to_csv(&self) -> String {
        let k = self.rows.first().map_or(0, |r| r.class_coverage.len());
        let mut out = String::from("total_coverage");
        for y in 1..=k {
            out.push_str(&format!(",cov_{y}"));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!("{}", row.total_coverage));
            for c in &row.class_coverage {
                out.push_str(&format!(",{c}"));
            }
            out.push('\n');
        }
        out
    }
}

/// For each total coverage `1 - alpha` in the grid, compute the oracle total
/// threshold and the per-class coverages `P\{p(y|X) >= t | Y = y\}`.
pub fn coverage_curve(
    spec: &GaussianMixtureSpec,
    total_coverage_grid: &[f64],
    n_mc: usize,
    seed: u64,
) -> Result<CoverageCurve> {
    let k = spec.class_count();
    let mut rows = Vec::with_capacity(total_coverage_grid.len());
    for (gi, &coverage) in total_coverage_grid.iter().enumerate() {
        if !(coverage > 0.0 && coverage < 1.0) {
            return Err(Error::invalid_argument(format!(
                "grid coverages must lie strictly in (0, 1), got {coverage}"
            )));
        }
        let alpha = 1.0 - coverage;
        let t = total_threshold(spec, alpha, n_mc, rng::derive(seed, "curve-threshold", gi as u64))?;
        let mut class_coverage = Vec::with_capacity(k);
        for y in 1..=k {
            let lane = (gi * (k + 1) + y) as u64;
            let chunks = rng::chunked_map(n_mc, CHUNK, rng::thread_cap(), |chunk, range| {
                let mut rng = rng::stream(seed, "curve-class-coverage", lane, chunk as u64);
                let mut buf = vec![0.0; spec.dim()];
                let mut hits = 0usize;
                for _ in range {
                    spec.draw_feature(y, &mut rng, &mut buf);
                    if spec.posterior_at(&buf)[y - 1] >= t {
                        hits += 1;
                    }
                }
                hits
            });
            class_coverage.push(chunks.into_iter().sum::<usize>() as f64 / n_mc as f64);
        }
        rows.push(CurveRow {
            total_coverage: coverage,
            class_coverage,
        });
    }
    Ok(CoverageCurve { rows })
}

/// Axis-aligned box for 2-D rasters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        if !(x_min < x_max && y_min < y_max)
            || [x_min, x_max, y_min, y_max].iter().any(|v| !v.is_finite())
        {
            return Err(Error::invalid_argument(
                "bounding box must have finite, increasing extents",
            ));
        }
        Ok(BoundingBox {
            x_min,
            x_max,
            y_min,
            y_max,
        })
    }
}

/// Prediction sets evaluated on a regular grid; the raw data behind the
/// classification-region figures.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionRaster {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major over `ys` then `xs`.
    pub cells: Vec<PredictionSet>,
}

impl RegionRaster {
    pub fn cell(&self, ix: usize, iy: usize) -> &PredictionSet {
        &self.cells[iy * self.xs.len() + ix]
    }

    /// CSV export: `x,y,set_bitmask` with bit `class - 1` per member.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,set_bitmask\n");
        for (iy, &y) in self.ys.iter().enumerate() {
            for (ix, &x) in self.xs.iter().enumerate() {
                out.push_str(&format!("{x},{y},{}\n", self.cell(ix, iy).bitmask()));
            }
        }
        out
    }

    pub fn has_empty_cell(&self) -> bool {
        self.cells.iter().any(|c| c.is_empty())
    }
}

fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

/// Evaluate the level-set rule on a `resolution x resolution` grid over the
/// box. Requires a 2-D mixture.
pub fn region_raster(
    spec: &GaussianMixtureSpec,
    thresholds: &ThresholdVector,
    bbox: &BoundingBox,
    resolution: usize,
) -> Result<RegionRaster> {
    if spec.dim() != 2 {
        return Err(Error::invalid_argument(format!(
            "rasters need a 2-D mixture, this one has dimension {}",
            spec.dim()
        )));
    }
    if resolution == 0 {
        return Err(Error::invalid_argument("resolution must be positive"));
    }
    let entries = thresholds.entries_for(spec.class_count())?;
    let xs = linspace(bbox.x_min, bbox.x_max, resolution);
    let ys = linspace(bbox.y_min, bbox.y_max, resolution);
    let mut cells = Vec::with_capacity(resolution * resolution);
    for &y in &ys {
        for &x in &xs {
            let probs = spec.posterior_at(&[x, y]);
            let members: Vec<usize> = (1..=spec.class_count())
                .filter(|&c| entries[c - 1].admits(probs[c - 1]))
                .collect();
            cells.push(PredictionSet::new(members, spec.class_count()).expect("grid set valid"));
        }
    }
    Ok(RegionRaster { xs, ys, cells })
}
