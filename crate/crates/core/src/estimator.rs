//! Relative density-ratio fitting.
//!
//! The ratio `r_a(x) = p(x) / (a p(x) + (1 - a) p'(x))` is modeled as a
//! Gaussian kernel expansion `g(x) = sum_l theta_l K(x, c_l)` over centers
//! drawn from the numerator samples. Minimizing the empirical squared error
//! against `r_a` with a ridge penalty gives `theta = (H + lambda I)^-1 h`,
//! where
//!
//! ```text
//! H = (a / n) A^T A + ((1 - a) / n') B^T B,   h = (1 / n) A^T 1
//! ```
//!
//! and `A`, `B` are the kernel design matrices of the numerator and
//! denominator samples against the centers. Kernel width and ridge strength
//! are chosen by k-fold cross-validation on the same squared-error criterion.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{kernel_matrix, median_pairwise_distance, select_centers, KernelSpec, SampleSet};
use crate::linalg::solve_shifted_symmetric;
use crate::rng::{derive_seed, rng_from_seed};

/// Multipliers applied to the median pairwise distance to form the default width grid.
pub const DEFAULT_SIGMA_MULTIPLIERS: [f64; 6] = [0.25, 0.5, 0.75, 1.0, 1.5, 2.0];
pub const DEFAULT_LAMBDA_GRID: [f64; 5] = [1e-3, 1e-2, 1e-1, 1.0, 10.0];
pub const DEFAULT_CV_FOLDS: usize = 5;
pub const DEFAULT_MAX_CENTERS: usize = 100;

/// Candidate kernel widths for cross-validation.
#[derive(Debug, Clone, PartialEq)]
pub enum SigmaGrid {
    /// Multiples of the median pairwise distance of the pooled samples.
    MedianScaled(Vec<f64>),
    /// Absolute widths.
    Fixed(Vec<f64>),
}

impl SigmaGrid {
    fn values(&self) -> &[f64] {
        match self {
            SigmaGrid::MedianScaled(v) | SigmaGrid::Fixed(v) => v,
        }
    }

    /// Absolute widths for the given pair of sample sets.
    pub fn resolve(&self, numerator: &SampleSet, denominator: &SampleSet) -> Result<Vec<f64>> {
        match self {
            SigmaGrid::Fixed(v) => Ok(v.clone()),
            SigmaGrid::MedianScaled(mults) => {
                let median = median_pairwise_distance(&numerator.concat(denominator)?)?;
                Ok(mults.iter().map(|m| m * median).collect())
            }
        }
    }
}

impl Default for SigmaGrid {
    fn default() -> Self {
        SigmaGrid::MedianScaled(DEFAULT_SIGMA_MULTIPLIERS.to_vec())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RulsifConfig {
    /// Mixing weight of the numerator density in the ratio's denominator, in `[0, 1)`.
    pub alpha: f64,
    pub sigma_grid: SigmaGrid,
    pub lambda_grid: Vec<f64>,
    pub cv_folds: usize,
    pub max_centers: usize,
    pub seed: u64,
}

impl RulsifConfig {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            sigma_grid: SigmaGrid::default(),
            lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
            cv_folds: DEFAULT_CV_FOLDS,
            max_centers: DEFAULT_MAX_CENTERS,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_sigma_grid(mut self, grid: SigmaGrid) -> Self {
        self.sigma_grid = grid;
        self
    }

    pub fn with_lambda_grid(mut self, grid: Vec<f64>) -> Self {
        self.lambda_grid = grid;
        self
    }

    pub fn with_folds(mut self, folds: usize) -> Self {
        self.cv_folds = folds;
        self
    }

    pub fn with_max_centers(mut self, max_centers: usize) -> Self {
        self.max_centers = max_centers;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        let sigmas = self.sigma_grid.values();
        if sigmas.is_empty() || self.lambda_grid.is_empty() {
            return Err(Error::invalid("parameter grids must be non-empty"));
        }
        if sigmas.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::invalid("kernel widths must be positive and finite"));
        }
        if self.lambda_grid.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(Error::invalid("regularization values must be non-negative and finite"));
        }
        if self.cv_folds < 2 {
            return Err(Error::invalid("cross-validation needs at least 2 folds"));
        }
        if self.max_centers == 0 {
            return Err(Error::invalid("max_centers must be at least 1"));
        }
        Ok(())
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha must lie in [0, 1), got {alpha}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvEntry {
    pub sigma: f64,
    pub lambda: f64,
    pub score: f64,
}

/// Cross-validation scores over the `(sigma, lambda)` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub entries: Vec<CvEntry>,
    pub selected: (f64, f64),
}

impl CvReport {
    /// Picks the minimum score. Ties go to the larger lambda, then the larger sigma.
    fn from_entries(entries: Vec<CvEntry>) -> Result<Self> {
        let mut best: Option<CvEntry> = None;
        for e in &entries {
            if !e.score.is_finite() {
                continue;
            }
            let better = match best {
                None => true,
                Some(b) => {
                    e.score < b.score
                        || (e.score == b.score
                            && (e.lambda > b.lambda || (e.lambda == b.lambda && e.sigma > b.sigma)))
                }
            };
            if better {
                best = Some(*e);
            }
        }
        let best = best.ok_or(Error::Singular {
            size: 0,
            lambda: entries.iter().map(|e| e.lambda).fold(f64::NAN, f64::max),
        })?;
        Ok(Self {
            entries,
            selected: (best.sigma, best.lambda),
        })
    }

    pub fn selected_score(&self) -> f64 {
        let (sigma, lambda) = self.selected;
        self.entries
            .iter()
            .find(|e| e.sigma == sigma && e.lambda == lambda)
            .map(|e| e.score)
            .unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    CrossValidated(CvReport),
    Fixed,
}

/// A fitted relative density-ratio model. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct RulsifModel {
    kernel: KernelSpec,
    alpha: f64,
    lambda: f64,
    theta: Array1<f64>,
    seed: u64,
    provenance: Provenance,
}

impl RulsifModel {
    /// Assembles a model from explicit parameters.
    pub fn from_parts(
        kernel: KernelSpec,
        alpha: f64,
        lambda: f64,
        theta: Array1<f64>,
        seed: u64,
        provenance: Provenance,
    ) -> Result<Self> {
        if theta.len() != kernel.num_centers() {
            return Err(Error::DimensionMismatch {
                expected: kernel.num_centers(),
                found: theta.len(),
            });
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("coefficients"));
        }
        if !(0.0..=1.0).contains(&alpha) || !(lambda >= 0.0) {
            return Err(Error::invalid("alpha or lambda out of range"));
        }
        Ok(Self {
            kernel,
            alpha,
            lambda,
            theta,
            seed,
            provenance,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn sigma(&self) -> f64 {
        self.kernel.width()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn theta(&self) -> &Array1<f64> {
        &self.theta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn cv_report(&self) -> Option<&CvReport> {
        match &self.provenance {
            Provenance::CrossValidated(r) => Some(r),
            Provenance::Fixed => None,
        }
    }

    /// Estimated ratio at each point.
    pub fn predict(&self, points: &SampleSet) -> Result<Array1<f64>> {
        predict(self, points)
    }

    pub fn to_json(&self) -> String {
        let doc = ModelDocument {
            alpha: self.alpha,
            sigma: self.sigma(),
            lambda: self.lambda,
            centers: CentersDocument {
                dim: self.kernel.centers().dim(),
                data: self.kernel.centers().as_slice().to_vec(),
            },
            theta: self.theta.to_vec(),
            seed: self.seed,
            cv_entries: self.cv_report().map(|r| r.entries.clone()).unwrap_or_default(),
        };
        serde_json::to_string(&doc).expect("model document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let centers = SampleSet::new(doc.centers.data, doc.centers.dim)?;
        let kernel = KernelSpec::new(doc.sigma, centers)?;
        let provenance = if doc.cv_entries.is_empty() {
            Provenance::Fixed
        } else {
            Provenance::CrossValidated(CvReport {
                entries: doc.cv_entries,
                selected: (doc.sigma, doc.lambda),
            })
        };
        Self::from_parts(kernel, doc.alpha, doc.lambda, Array1::from(doc.theta), doc.seed, provenance)
    }
}

#[derive(Serialize, Deserialize)]
struct CentersDocument {
    dim: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    alpha: f64,
    sigma: f64,
    lambda: f64,
    centers: CentersDocument,
    theta: Vec<f64>,
    seed: u64,
    cv_entries: Vec<CvEntry>,
}

fn gram(design: ArrayView2<f64>) -> Array2<f64> {
    design.t().dot(&design)
}

fn symmetrize(m: &mut Array2<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[[i, j]] + m[[j, i]]);
            m[[i, j]] = v;
            m[[j, i]] = v;
        }
    }
}

fn assemble_hhat(
    num_gram: &Array2<f64>,
    n: usize,
    den_gram: &Array2<f64>,
    n_prime: usize,
    alpha: f64,
) -> Array2<f64> {
    let mut h = den_gram * ((1.0 - alpha) / n_prime as f64);
    if alpha != 0.0 {
        h.scaled_add(alpha / n as f64, num_gram);
    }
    h
}

/// `H = (a / n) A^T A + ((1 - a) / n') B^T B`.
pub fn build_hhat(
    numerator: &SampleSet,
    denominator: &SampleSet,
    spec: &KernelSpec,
    alpha: f64,
) -> Result<Array2<f64>> {
    numerator.require_non_empty("numerator samples")?;
    denominator.require_non_empty("denominator samples")?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let b_mat = kernel_matrix(denominator, spec)?;
    let mut h = if alpha != 0.0 {
        let a_mat = kernel_matrix(numerator, spec)?;
        assemble_hhat(&gram(a_mat.view()), numerator.len(), &gram(b_mat.view()), denominator.len(), alpha)
    } else {
        spec.centers().check_dim(numerator.dim())?;
        gram(b_mat.view()) / denominator.len() as f64
    };
    symmetrize(&mut h);
    Ok(h)
}

/// `h_l = mean_i K(x_i, c_l)` over the numerator samples.
pub fn build_hvec(numerator: &SampleSet, spec: &KernelSpec) -> Result<Array1<f64>> {
    numerator.require_non_empty("numerator samples")?;
    let a_mat = kernel_matrix(numerator, spec)?;
    Ok(a_mat.mean_axis(Axis(0)).expect("non-empty"))
}

/// `theta = (H + lambda I)^-1 h`, the minimizer of
/// `theta^T H theta / 2 - h^T theta + lambda |theta|^2 / 2`.
pub fn solve_theta(hhat: &Array2<f64>, hvec: &Array1<f64>, lambda: f64) -> Result<Array1<f64>> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be non-negative, got {lambda}")));
    }
    solve_shifted_symmetric(hhat.view(), hvec.view(), lambda)
}

/// Fits with a fixed kernel width and regularization.
pub fn fit_fixed(
    numerator: &SampleSet,
    denominator: &SampleSet,
    centers: SampleSet,
    sigma: f64,
    lambda: f64,
    alpha: f64,
) -> Result<RulsifModel> {
    check_alpha(alpha)?;
    numerator.check_dim(denominator.dim())?;
    let spec = KernelSpec::new(sigma, centers)?;
    let hhat = build_hhat(numerator, denominator, &spec, alpha)?;
    let hvec = build_hvec(numerator, &spec)?;
    let theta = solve_theta(&hhat, &hvec, lambda)?;
    RulsifModel::from_parts(spec, alpha, lambda, theta, 0, Provenance::Fixed)
}

/// Fits the ratio model, choosing `(sigma, lambda)` by cross-validation.
///
/// Centers are selected once from the full numerator set and shared by
/// every fold; the final coefficients are refit on all samples.
pub fn fit(numerator: &SampleSet, denominator: &SampleSet, config: &RulsifConfig) -> Result<RulsifModel> {
    config.validate()?;
    check_pair(numerator, denominator)?;
    let centers = select_centers(numerator, config.max_centers, config.seed)?;
    let report = cross_validate_with_centers(numerator, denominator, &centers, config)?;
    let (sigma, lambda) = report.selected;
    let mut model = fit_fixed(numerator, denominator, centers, sigma, lambda, config.alpha)?;
    model.seed = config.seed;
    model.provenance = Provenance::CrossValidated(report);
    Ok(model)
}

fn check_pair(numerator: &SampleSet, denominator: &SampleSet) -> Result<()> {
    numerator.require_non_empty("numerator samples")?;
    denominator.require_non_empty("denominator samples")?;
    numerator.check_dim(denominator.dim())
}

/// `g(x) = sum_l theta_l K(x, c_l)`. Values are not clipped and may be negative.
pub fn predict(model: &RulsifModel, points: &SampleSet) -> Result<Array1<f64>> {
    Ok(kernel_matrix(points, &model.kernel)?.dot(&model.theta))
}

/// Empirical squared-error criterion from model outputs, constant dropped:
/// `(a/2) mean(g_num^2) + ((1-a)/2) mean(g_den^2) - mean(g_num)`.
pub fn j_from_values(g_num: &[f64], g_den: &[f64], alpha: f64) -> Result<f64> {
    if g_num.is_empty() || g_den.is_empty() {
        return Err(Error::EmptyInput("holdout samples"));
    }
    let mean = |v: &[f64], f: fn(f64) -> f64| v.iter().map(|&x| f(x)).sum::<f64>() / v.len() as f64;
    let sq = |x: f64| x * x;
    Ok(0.5 * alpha * mean(g_num, sq) + 0.5 * (1.0 - alpha) * mean(g_den, sq) - mean(g_num, |x| x))
}

/// Held-out squared-error criterion of `model`; lower is better.
pub fn j_criterion(
    model: &RulsifModel,
    holdout_numerator: &SampleSet,
    holdout_denominator: &SampleSet,
    alpha: f64,
) -> Result<f64> {
    holdout_numerator.require_non_empty("holdout numerator")?;
    holdout_denominator.require_non_empty("holdout denominator")?;
    let g_num = predict(model, holdout_numerator)?;
    let g_den = predict(model, holdout_denominator)?;
    j_from_values(g_num.as_slice().unwrap(), g_den.as_slice().unwrap(), alpha)
}

/// Scores every `(sigma, lambda)` pair by k-fold cross-validation.
pub fn cross_validate(numerator: &SampleSet, denominator: &SampleSet, config: &RulsifConfig) -> Result<CvReport> {
    config.validate()?;
    check_pair(numerator, denominator)?;
    let centers = select_centers(numerator, config.max_centers, config.seed)?;
    cross_validate_with_centers(numerator, denominator, &centers, config)
}

fn fold_bounds(len: usize, folds: usize) -> Vec<(usize, usize)> {
    (0..folds).map(|f| (f * len / folds, (f + 1) * len / folds)).collect()
}

fn shuffled(set: &SampleSet, seed: u64) -> SampleSet {
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.shuffle(&mut rng_from_seed(seed));
    set.select(&order)
}

/// Per-fold sufficient statistics of one design matrix.
struct FoldStats {
    grams: Vec<Array2<f64>>,
    sums: Vec<Array1<f64>>,
}

impl FoldStats {
    fn new(design: &Array2<f64>, bounds: &[(usize, usize)], with_gram: bool) -> Self {
        let mut grams = Vec::with_capacity(bounds.len());
        let mut sums = Vec::with_capacity(bounds.len());
        for &(lo, hi) in bounds {
            let block = design.slice(s![lo..hi, ..]);
            if with_gram {
                grams.push(gram(block));
            }
            sums.push(block.sum_axis(Axis(0)));
        }
        Self { grams, sums }
    }

    fn gram_without(&self, fold: usize) -> Array2<f64> {
        let b = self.grams[0].nrows();
        let mut acc = Array2::zeros((b, b));
        for (k, g) in self.grams.iter().enumerate() {
            if k != fold {
                acc += g;
            }
        }
        acc
    }

    fn sum_without(&self, fold: usize) -> Array1<f64> {
        let mut acc = Array1::zeros(self.sums[0].len());
        for (k, v) in self.sums.iter().enumerate() {
            if k != fold {
                acc += v;
            }
        }
        acc
    }
}

pub(crate) fn cross_validate_with_centers(
    numerator: &SampleSet,
    denominator: &SampleSet,
    centers: &SampleSet,
    config: &RulsifConfig,
) -> Result<CvReport> {
    let folds = config.cv_folds;
    let available = numerator.len().min(denominator.len());
    if folds > available {
        return Err(Error::TooManyFolds { folds, available });
    }
    let sigmas = config.sigma_grid.resolve(numerator, denominator)?;
    let alpha = config.alpha;
    let num = shuffled(numerator, derive_seed(config.seed, 1));
    let den = shuffled(denominator, derive_seed(config.seed, 2));
    let num_bounds = fold_bounds(num.len(), folds);
    let den_bounds = fold_bounds(den.len(), folds);

    let per_sigma: Vec<Result<Vec<CvEntry>>> = sigmas
        .par_iter()
        .map(|&sigma| {
            let spec = KernelSpec::new(sigma, centers.clone())?;
            let a_mat = kernel_matrix(&num, &spec)?;
            let b_mat = kernel_matrix(&den, &spec)?;
            let a_stats = FoldStats::new(&a_mat, &num_bounds, alpha != 0.0);
            let b_stats = FoldStats::new(&b_mat, &den_bounds, true);
            let mut totals = vec![0.0; config.lambda_grid.len()];
            for f in 0..folds {
                let (nlo, nhi) = num_bounds[f];
                let (dlo, dhi) = den_bounds[f];
                let n_tr = num.len() - (nhi - nlo);
                let n_prime_tr = den.len() - (dhi - dlo);
                let mut hhat = b_stats.gram_without(f) * ((1.0 - alpha) / n_prime_tr as f64);
                if alpha != 0.0 {
                    hhat.scaled_add(alpha / n_tr as f64, &a_stats.gram_without(f));
                }
                let hvec = a_stats.sum_without(f) / n_tr as f64;
                let hold_a = a_mat.slice(s![nlo..nhi, ..]);
                let hold_b = b_mat.slice(s![dlo..dhi, ..]);
                for (total, &lambda) in totals.iter_mut().zip(&config.lambda_grid) {
                    let score = match solve_theta(&hhat, &hvec, lambda) {
                        Ok(theta) => {
                            let g_num = hold_a.dot(&theta);
                            let g_den = hold_b.dot(&theta);
                            j_from_values(g_num.as_slice().unwrap(), g_den.as_slice().unwrap(), alpha)?
                        }
                        Err(Error::Singular { .. }) => f64::INFINITY,
                        Err(e) => return Err(e),
                    };
                    *total += score;
                }
            }
            Ok(config
                .lambda_grid
                .iter()
                .zip(totals)
                .map(|(&lambda, total)| CvEntry {
                    sigma,
                    lambda,
                    score: total / folds as f64,
                })
                .collect())
        })
        .collect();

    let mut entries = Vec::with_capacity(sigmas.len() * config.lambda_grid.len());
    for block in per_sigma {
        entries.extend(block?);
    }
    CvReport::from_entries(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::shifted_residual;
    use crate::rng::rng_from_seed;
    use ndarray::array;
    use rand::Rng;
    use rand_distr::StandardNormal;
    use rulsif_testkit::{descent_minimize_objective, symmetric_eigenvalues};

    fn line(values: &[f64]) -> SampleSet {
        SampleSet::from_scalars(values).unwrap()
    }

    fn gaussian_set(n: usize, dim: usize, shift: f64, seed: u64) -> SampleSet {
        let mut rng = rng_from_seed(seed);
        let data: Vec<f64> = (0..n * dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal) + shift)
            .collect();
        SampleSet::new(data, dim).unwrap()
    }

    fn to_rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
        m.rows().into_iter().map(|r| r.to_vec()).collect()
    }

    #[test]
    fn hhat_single_point() {
        let zero = line(&[0.0]);
        let spec = KernelSpec::new(0.7, zero.clone()).unwrap();
        let h = build_hhat(&zero, &zero, &spec, 0.5).unwrap();
        assert_eq!(h, array![[1.0]]);
    }

    #[test]
    fn hhat_alpha_zero_ignores_numerator() {
        let num = gaussian_set(30, 2, 0.0, 1);
        let den = gaussian_set(40, 2, 0.5, 2);
        let other_num = gaussian_set(25, 2, 3.0, 3);
        let spec = KernelSpec::new(1.0, num.clone()).unwrap();
        let h1 = build_hhat(&num, &den, &spec, 0.0).unwrap();
        let h2 = build_hhat(&other_num, &den, &spec, 0.0).unwrap();
        assert_eq!(h1, h2);
    }

    #[test]
    fn hhat_is_psd() {
        for seed in 0..5 {
            let num = gaussian_set(60, 3, 0.0, seed);
            let den = gaussian_set(50, 3, 0.7, seed + 100);
            let spec = KernelSpec::new(0.8, num.slice(0, 20)).unwrap();
            let h = build_hhat(&num, &den, &spec, 0.5).unwrap();
            let eig = symmetric_eigenvalues(&to_rows(&h));
            let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(min >= -1e-10, "min eigenvalue {min}");
        }
    }

    #[test]
    fn hvec_examples() {
        let spec = KernelSpec::new(1.0, line(&[0.0])).unwrap();
        assert_eq!(build_hvec(&line(&[0.0]), &spec).unwrap(), array![1.0]);
        let h = build_hvec(&line(&[0.0, 2.0]), &spec).unwrap();
        assert!((h[0] - (1.0 + (-2f64).exp()) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn solve_theta_scalar() {
        let theta = solve_theta(&array![[1.0]], &array![1.0], 1.0).unwrap();
        assert_eq!(theta, array![0.5]);
        assert!(solve_theta(&array![[1.0]], &array![1.0], -1.0).is_err());
    }

    #[test]
    fn solve_theta_shrinks_with_lambda() {
        let num = gaussian_set(40, 1, 0.0, 11);
        let den = gaussian_set(40, 1, 1.0, 12);
        let spec = KernelSpec::new(0.5, num.slice(0, 10)).unwrap();
        let h = build_hhat(&num, &den, &spec, 0.3).unwrap();
        let v = build_hvec(&num, &spec).unwrap();
        let mut last = f64::INFINITY;
        for lambda in [1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0] {
            let theta = solve_theta(&h, &v, lambda).unwrap();
            let norm = theta.dot(&theta).sqrt();
            assert!(norm < last);
            last = norm;
        }
    }

    #[test]
    fn solve_theta_singular_without_ridge() {
        let twin = line(&[0.0, 0.0]);
        let spec = KernelSpec::new(1.0, twin.clone()).unwrap();
        let h = build_hhat(&twin, &twin, &spec, 0.5).unwrap();
        let v = build_hvec(&twin, &spec).unwrap();
        assert!(matches!(solve_theta(&h, &v, 0.0), Err(Error::Singular { .. })));
    }

    #[test]
    fn solve_theta_matches_descent_oracle() {
        for seed in 0..5u64 {
            let num = gaussian_set(30, 2, 0.0, seed);
            let den = gaussian_set(30, 2, 0.5, seed + 50);
            let spec = KernelSpec::new(1.0, num.slice(0, 5)).unwrap();
            let h = build_hhat(&num, &den, &spec, 0.5).unwrap();
            let v = build_hvec(&num, &spec).unwrap();
            let theta = solve_theta(&h, &v, 0.1).unwrap();
            let oracle = descent_minimize_objective(&to_rows(&h), &v.to_vec(), 0.1, 200_000, None).unwrap();
            for (a, b) in theta.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-4, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn fit_on_identical_sets_is_near_one() {
        let x = gaussian_set(150, 1, 0.0, 5);
        for alpha in [0.0, 0.5, 0.9] {
            let model = fit(&x, &x, &RulsifConfig::new(alpha).with_seed(3)).unwrap();
            let mean = model.predict(&x).unwrap().mean().unwrap();
            assert!((mean - 1.0).abs() < 0.2, "alpha {alpha}: mean {mean}");
        }
    }

    #[test]
    fn fit_satisfies_normal_equations() {
        let num = gaussian_set(120, 2, 0.0, 21);
        let den = gaussian_set(80, 2, 0.4, 22);
        let model = fit(&num, &den, &RulsifConfig::new(0.5).with_max_centers(50)).unwrap();
        let h = build_hhat(&num, &den, model.kernel(), 0.5).unwrap();
        let v = build_hvec(&num, model.kernel()).unwrap();
        assert!(shifted_residual(&h, model.theta(), &v, model.lambda()) <= 1e-8);
    }

    #[test]
    fn singleton_grid_is_selected() {
        let num = gaussian_set(40, 1, 0.0, 31);
        let den = gaussian_set(40, 1, 1.0, 32);
        let config = RulsifConfig::new(0.5)
            .with_sigma_grid(SigmaGrid::Fixed(vec![0.8]))
            .with_lambda_grid(vec![0.05]);
        let model = fit(&num, &den, &config).unwrap();
        let report = model.cv_report().unwrap();
        assert_eq!(report.entries.len(), 1);
        assert_eq!(report.selected, (0.8, 0.05));
        assert_eq!((model.sigma(), model.lambda()), (0.8, 0.05));
    }

    #[test]
    fn alpha_zero_matches_plain_least_squares_fit() {
        let num = gaussian_set(60, 1, 0.0, 41);
        let den = gaussian_set(60, 1, 0.5, 42);
        let spec = KernelSpec::new(0.6, num.clone()).unwrap();
        // reference: H from the denominator only
        let b_mat = kernel_matrix(&den, &spec).unwrap();
        let h_ref = b_mat.t().dot(&b_mat) / 60.0;
        let v = build_hvec(&num, &spec).unwrap();
        let theta_ref = solve_theta(&h_ref, &v, 0.1).unwrap();
        let model = fit_fixed(&num, &den, num.clone(), 0.6, 0.1, 0.0).unwrap();
        for (a, b) in model.theta().iter().zip(theta_ref.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn permuting_samples_leaves_solution_unchanged() {
        let num = gaussian_set(50, 2, 0.0, 51);
        let den = gaussian_set(70, 2, 0.3, 52);
        let centers = num.slice(0, 15);
        let rev_num = num.select(&(0..50).rev().collect::<Vec<_>>());
        let rev_den = den.select(&(0..70).rev().collect::<Vec<_>>());
        let m1 = fit_fixed(&num, &den, centers.clone(), 0.9, 0.01, 0.5).unwrap();
        let m2 = fit_fixed(&rev_num, &rev_den, centers, 0.9, 0.01, 0.5).unwrap();
        for (a, b) in m1.theta().iter().zip(m2.theta().iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn predict_examples() {
        let spec = KernelSpec::new(1.0, line(&[0.0])).unwrap();
        let model = RulsifModel::from_parts(spec.clone(), 0.5, 0.0, array![0.5], 0, Provenance::Fixed).unwrap();
        assert_eq!(model.predict(&line(&[0.0])).unwrap(), array![0.5]);
        let far = model.predict(&line(&[60.0])).unwrap();
        assert!(far[0].abs() < 1e-300);
        let scaled = RulsifModel::from_parts(spec, 0.5, 0.0, array![1.5], 0, Provenance::Fixed).unwrap();
        let pts = line(&[-0.3, 0.2, 1.7]);
        let a = model.predict(&pts).unwrap();
        let b = scaled.predict(&pts).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((3.0 * x - y).abs() < 1e-15);
        }
        assert!(model.predict(&SampleSet::from_rows(&[[0.0, 1.0]]).unwrap()).is_err());
    }

    #[test]
    fn j_criterion_constant_functions() {
        assert_eq!(j_from_values(&[0.0; 4], &[0.0; 3], 0.3).unwrap(), 0.0);
        for alpha in [0.0, 0.25, 0.9] {
            assert!((j_from_values(&[1.0; 4], &[1.0; 3], alpha).unwrap() + 0.5).abs() < 1e-15);
        }
        assert!(j_from_values(&[], &[1.0], 0.5).is_err());

        let spec = KernelSpec::new(1.0, line(&[0.0])).unwrap();
        let zero = RulsifModel::from_parts(spec, 0.5, 0.0, array![0.0], 0, Provenance::Fixed).unwrap();
        assert_eq!(j_criterion(&zero, &line(&[1.0]), &line(&[2.0]), 0.5).unwrap(), 0.0);
        assert!(j_criterion(&zero, &line(&[1.0]), &line(&[]), 0.5).is_err());
    }

    #[test]
    fn cv_duplicate_entries_score_identically() {
        let num = gaussian_set(40, 1, 0.0, 61);
        let den = gaussian_set(40, 1, 0.8, 62);
        let config = RulsifConfig::new(0.5)
            .with_sigma_grid(SigmaGrid::Fixed(vec![0.5, 0.5]))
            .with_lambda_grid(vec![0.1, 0.1]);
        let report = cross_validate(&num, &den, &config).unwrap();
        assert_eq!(report.entries.len(), 4);
        let first = report.entries[0].score;
        assert!(report.entries.iter().all(|e| e.score == first));
        // full tie: larger lambda, then larger sigma, are all equal here
        assert_eq!(report.selected, (0.5, 0.1));
    }

    #[test]
    fn cv_selection_is_minimal_and_tie_broken() {
        let entries = vec![
            CvEntry { sigma: 1.0, lambda: 0.1, score: -0.4 },
            CvEntry { sigma: 2.0, lambda: 0.1, score: -0.4 },
            CvEntry { sigma: 0.5, lambda: 1.0, score: -0.4 },
            CvEntry { sigma: 3.0, lambda: 0.01, score: -0.3 },
        ];
        assert_eq!(CvReport::from_entries(entries.clone()).unwrap().selected, (0.5, 1.0));
        let mut e2 = entries;
        e2[2].score = -0.35;
        assert_eq!(CvReport::from_entries(e2).unwrap().selected, (2.0, 0.1));

        let num = gaussian_set(60, 1, 0.0, 71);
        let den = gaussian_set(60, 1, 0.5, 72);
        let report = cross_validate(&num, &den, &RulsifConfig::new(0.5)).unwrap();
        let best = report.selected_score();
        assert!(report.entries.iter().all(|e| best <= e.score));
    }

    #[test]
    fn cv_rejects_too_many_folds() {
        let num = gaussian_set(3, 1, 0.0, 81);
        let den = gaussian_set(10, 1, 0.0, 82);
        assert!(matches!(
            cross_validate(&num, &den, &RulsifConfig::new(0.5)),
            Err(Error::TooManyFolds { folds: 5, available: 3 })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(RulsifConfig::new(1.0).validate().is_err());
        assert!(RulsifConfig::new(-0.1).validate().is_err());
        assert!(RulsifConfig::new(0.5).with_folds(1).validate().is_err());
        assert!(RulsifConfig::new(0.5).with_lambda_grid(vec![]).validate().is_err());
        assert!(RulsifConfig::new(0.5).with_sigma_grid(SigmaGrid::Fixed(vec![0.0])).validate().is_err());
        assert!(RulsifConfig::new(0.0).validate().is_ok());
    }

    #[test]
    fn fit_is_deterministic_and_json_round_trips() {
        let num = gaussian_set(150, 2, 0.0, 91);
        let den = gaussian_set(130, 2, 0.5, 92);
        let config = RulsifConfig::new(0.5).with_seed(17);
        let m1 = fit(&num, &den, &config).unwrap();
        let m2 = fit(&num, &den, &config).unwrap();
        assert_eq!(m1, m2);
        let text = m1.to_json();
        assert!(text.starts_with(r#"{"alpha":0.5,"sigma":"#));
        let back = RulsifModel::from_json(&text).unwrap();
        assert_eq!(back, m1);
        assert_eq!(back.predict(&den).unwrap(), m1.predict(&den).unwrap());
        assert_eq!(back.to_json(), text);
        assert!(RulsifModel::from_json("{\"alpha\":0.5}").is_err());
    }
}
