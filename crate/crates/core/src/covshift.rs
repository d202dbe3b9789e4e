//! Importance-weighted kernel regression under covariate shift.
//!
//! Training losses are reweighted toward the test input distribution with
//! either relative importance weights
//! `w_a(x) = p_te(x) / ((1 - a) p_te(x) + a p_tr(x))`, each estimated directly
//! by a relative ratio fit, or exponentially flattened weights `r(x)^tau`
//! built from a single estimate of the plain ratio `r = p_te / p_tr`.
//!
//! Note the convention: here `a = 0` means no weighting and `a = 1` the plain
//! importance ratio, the reverse of the ratio estimator's mixing parameter.
//! The estimator therefore runs with mixing parameter `1 - a`.

use std::fmt;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{fit, RulsifConfig};
use crate::kernel::{kernel_matrix, median_pairwise_distance, KernelSpec, SampleSet};
use crate::linalg::solve_shifted_symmetric;
use crate::rng::{derive_seed, rng_from_seed};
use crate::stats::Summary;
use crate::synthdata::{sinc_dataset, Scenario};

/// Inputs paired with real-valued targets.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub inputs: SampleSet,
    pub targets: Vec<f64>,
}

impl LabeledSet {
    pub fn new(inputs: SampleSet, targets: Vec<f64>) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.len(),
                found: targets.len(),
            });
        }
        if targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("targets"));
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WeightKind {
    /// Unweighted least squares.
    None,
    /// Relative importance weights `w_a`.
    Riw,
    /// Flattened importance weights `r^tau`.
    Eiw,
    /// Plain importance weights `r`.
    Iw,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightScheme {
    pub kind: WeightKind,
    /// `a` for relative weights, `tau` for flattened weights.
    pub param: f64,
}

impl WeightScheme {
    pub fn new(kind: WeightKind, param: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&param) {
            return Err(Error::invalid(format!("weight parameter must lie in [0, 1], got {param}")));
        }
        match kind {
            WeightKind::None if param != 0.0 => Err(Error::invalid("unweighted scheme takes parameter 0")),
            WeightKind::Iw if param != 1.0 => Err(Error::invalid("importance weighting takes parameter 1")),
            _ => Ok(Self { kind, param }),
        }
    }

    pub fn none() -> Self {
        Self { kind: WeightKind::None, param: 0.0 }
    }

    pub fn iw() -> Self {
        Self { kind: WeightKind::Iw, param: 1.0 }
    }

    pub fn riw(alpha: f64) -> Result<Self> {
        Self::new(WeightKind::Riw, alpha)
    }

    pub fn eiw(tau: f64) -> Result<Self> {
        Self::new(WeightKind::Eiw, tau)
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            WeightKind::None => "none",
            WeightKind::Riw => "riw",
            WeightKind::Eiw => "eiw",
            WeightKind::Iw => "iw",
        }
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name(), self.param)
    }
}

/// Estimated `w_a` at the training inputs, negative estimates floored at 0.
///
/// `alpha = 0` returns all ones without fitting anything.
pub fn relative_importance_weights(
    train_inputs: &SampleSet,
    test_inputs: &SampleSet,
    alpha: f64,
    config: &RulsifConfig,
) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    train_inputs.require_non_empty("training inputs")?;
    test_inputs.check_dim(train_inputs.dim())?;
    if alpha == 0.0 {
        return Ok(vec![1.0; train_inputs.len()]);
    }
    let mut cfg = config.clone();
    cfg.alpha = 1.0 - alpha;
    let model = fit(test_inputs, train_inputs, &cfg)?;
    Ok(model.predict(train_inputs)?.iter().map(|w| w.max(0.0)).collect())
}

/// Flattened weights `max(r, 0)^tau` from one estimate of the plain ratio.
pub fn eiw_weights(train_inputs: &SampleSet, test_inputs: &SampleSet, tau: f64, config: &RulsifConfig) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::invalid(format!("tau must lie in [0, 1], got {tau}")));
    }
    if tau == 0.0 {
        train_inputs.require_non_empty("training inputs")?;
        return Ok(vec![1.0; train_inputs.len()]);
    }
    let ratio = relative_importance_weights(train_inputs, test_inputs, 1.0, config)?;
    Ok(flatten(&ratio, tau))
}

fn flatten(ratio: &[f64], tau: f64) -> Vec<f64> {
    ratio.iter().map(|r| r.max(0.0).powf(tau)).collect()
}

/// Weights of `scheme` at the training inputs.
pub fn scheme_weights(
    scheme: WeightScheme,
    train_inputs: &SampleSet,
    test_inputs: &SampleSet,
    config: &RulsifConfig,
) -> Result<Vec<f64>> {
    match scheme.kind {
        WeightKind::None => relative_importance_weights(train_inputs, test_inputs, 0.0, config),
        WeightKind::Riw => relative_importance_weights(train_inputs, test_inputs, scheme.param, config),
        WeightKind::Eiw => eiw_weights(train_inputs, test_inputs, scheme.param, config),
        WeightKind::Iw => relative_importance_weights(train_inputs, test_inputs, 1.0, config),
    }
}

/// Weighted Gaussian-kernel regression `f(x) = sum_i beta_i exp(-|x - c_i|^2 / (2 rho^2))`
/// with the test inputs as centers.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedFit {
    pub coefficients: Vec<f64>,
    pub rho: f64,
    pub weights: Vec<f64>,
    pub scheme: Option<WeightScheme>,
    pub test_mse: Option<f64>,
    /// Importance-weighted validation error per candidate width, in grid order.
    pub cv_errors: Vec<(f64, f64)>,
    kernel: KernelSpec,
}

impl WeightedFit {
    pub fn predict(&self, points: &SampleSet) -> Result<Vec<f64>> {
        let design = kernel_matrix(points, &self.kernel)?;
        Ok(design.dot(&ndarray::ArrayView1::from(&self.coefficients)).to_vec())
    }

    pub fn mse(&self, data: &LabeledSet) -> Result<f64> {
        let pred = self.predict(&data.inputs)?;
        Ok(pred.iter().zip(&data.targets).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / data.len().max(1) as f64)
    }
}

/// Minimizes `(1/n) sum_j w_j (f(x_j) - y_j)^2 + ridge |beta|^2`.
fn solve_weighted(
    inputs: &SampleSet,
    targets: &[f64],
    weights: &[f64],
    spec: &KernelSpec,
    ridge: f64,
) -> Result<Vec<f64>> {
    let design = kernel_matrix(inputs, spec)?;
    let n = inputs.len() as f64;
    let mut weighted = design.clone();
    for (mut row, &w) in weighted.rows_mut().into_iter().zip(weights) {
        row *= w / n;
    }
    let normal = weighted.t().dot(&design);
    let rhs = weighted.t().dot(&ndarray::ArrayView1::from(targets));
    Ok(solve_shifted_symmetric(normal.view(), rhs.view(), ridge)?.to_vec())
}

/// Weighted kernel least squares with the width chosen by importance-weighted
/// k-fold cross-validation.
///
/// A fold's validation error is `(1/|fold|) sum_j w_j (f(x_j) - y_j)^2`, the
/// same weights that enter training. With a single candidate width no
/// cross-validation is run.
pub fn weighted_kernel_ls(
    train: &LabeledSet,
    test_inputs: &SampleSet,
    weights: &[f64],
    rho_grid: &[f64],
    ridge: f64,
    cv_folds: usize,
    seed: u64,
) -> Result<WeightedFit> {
    train.inputs.require_non_empty("training inputs")?;
    test_inputs.require_non_empty("test inputs")?;
    test_inputs.check_dim(train.inputs.dim())?;
    if weights.len() != train.len() {
        return Err(Error::DimensionMismatch {
            expected: train.len(),
            found: weights.len(),
        });
    }
    if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(Error::invalid("weights must be finite and non-negative"));
    }
    if rho_grid.is_empty() {
        return Err(Error::invalid("width grid must be non-empty"));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::invalid("ridge must be non-negative"));
    }

    let cv_errors = if rho_grid.len() == 1 {
        vec![(rho_grid[0], f64::NAN)]
    } else {
        if cv_folds < 2 || cv_folds > train.len() {
            return Err(Error::TooManyFolds {
                folds: cv_folds,
                available: train.len(),
            });
        }
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng_from_seed(seed));
        let bounds: Vec<(usize, usize)> = (0..cv_folds)
            .map(|f| (f * order.len() / cv_folds, (f + 1) * order.len() / cv_folds))
            .collect();
        rho_grid
            .iter()
            .map(|&rho| {
                let spec = KernelSpec::new(rho, test_inputs.clone())?;
                let mut total = 0.0;
                for &(lo, hi) in &bounds {
                    let fit_idx: Vec<usize> = order[..lo].iter().chain(&order[hi..]).copied().collect();
                    let val_idx = &order[lo..hi];
                    let w_fit: Vec<f64> = fit_idx.iter().map(|&i| weights[i]).collect();
                    let y_fit: Vec<f64> = fit_idx.iter().map(|&i| train.targets[i]).collect();
                    let beta = solve_weighted(&train.inputs.select(&fit_idx), &y_fit, &w_fit, &spec, ridge)?;
                    let pred = kernel_matrix(&train.inputs.select(val_idx), &spec)?
                        .dot(&ndarray::ArrayView1::from(&beta));
                    let err: f64 = val_idx
                        .iter()
                        .zip(pred.iter())
                        .map(|(&i, p)| weights[i] * (p - train.targets[i]).powi(2))
                        .sum();
                    total += err / val_idx.len() as f64;
                }
                Ok((rho, total / cv_folds as f64))
            })
            .collect::<Result<Vec<_>>>()?
    };

    // first minimum in grid order
    let rho = cv_errors
        .iter()
        .fold(None::<(f64, f64)>, |best, &(r, e)| match best {
            Some((_, be)) if !(e < be) => best,
            _ if e.is_nan() && best.is_some() => best,
            _ => Some((r, e)),
        })
        .map(|(r, _)| r)
        .unwrap();
    let kernel = KernelSpec::new(rho, test_inputs.clone())?;
    let coefficients = solve_weighted(&train.inputs, &train.targets, weights, &kernel, ridge)?;
    Ok(WeightedFit {
        coefficients,
        rho,
        weights: weights.to_vec(),
        scheme: None,
        test_mse: None,
        cv_errors,
        kernel,
    })
}

/// Settings of the covariate-shift regression benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct CovshiftSettings {
    pub n_tr: usize,
    pub n_te: usize,
    /// Multiples of the median pairwise distance of the test inputs.
    pub rho_multipliers: Vec<f64>,
    pub ridge: f64,
    pub cv_folds: usize,
    /// Ratio-fit settings; `alpha` is overridden per scheme.
    pub rulsif: RulsifConfig,
}

impl Default for CovshiftSettings {
    fn default() -> Self {
        Self {
            n_tr: 100,
            n_te: 200,
            rho_multipliers: vec![0.1, 0.2, 0.4, 0.8, 1.6],
            ridge: 1e-6,
            cv_folds: 5,
            rulsif: RulsifConfig::new(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub scheme: WeightScheme,
    pub mean_mse: f64,
    pub sd_mse: f64,
    pub runs: usize,
}

/// Test MSE of every scheme on one generated dataset.
pub fn covshift_run(
    scenario: Scenario,
    schemes: &[WeightScheme],
    settings: &CovshiftSettings,
    seed: u64,
) -> Result<Vec<WeightedFit>> {
    let (train, test) = sinc_dataset(scenario, settings.n_tr, settings.n_te, derive_seed(seed, 0))?;
    let rulsif = settings.rulsif.clone().with_seed(derive_seed(seed, 1));
    let median = median_pairwise_distance(&test.inputs)?;
    let rho_grid: Vec<f64> = settings.rho_multipliers.iter().map(|m| m * median).collect();

    // One plain-ratio estimate per run, shared by every flattened scheme.
    let mut ratio: Option<Vec<f64>> = None;
    let mut fits = Vec::with_capacity(schemes.len());
    for &scheme in schemes {
        let uses_plain_ratio = match scheme.kind {
            WeightKind::None => false,
            WeightKind::Riw => scheme.param == 1.0,
            WeightKind::Eiw | WeightKind::Iw => scheme.param > 0.0,
        };
        let weights = if uses_plain_ratio {
            if ratio.is_none() {
                ratio = Some(relative_importance_weights(&train.inputs, &test.inputs, 1.0, &rulsif)?);
            }
            flatten(ratio.as_ref().unwrap(), scheme.param)
        } else {
            scheme_weights(scheme, &train.inputs, &test.inputs, &rulsif)?
        };
        let mut fit = weighted_kernel_ls(
            &train,
            &test.inputs,
            &weights,
            &rho_grid,
            settings.ridge,
            settings.cv_folds,
            derive_seed(seed, 2),
        )?;
        fit.test_mse = Some(fit.mse(&test)?);
        fit.scheme = Some(scheme);
        fits.push(fit);
    }
    Ok(fits)
}

/// Mean and standard deviation of the test MSE of each scheme over `runs`
/// independently seeded datasets.
pub fn covshift_experiment(
    scenario: Scenario,
    schemes: &[WeightScheme],
    runs: usize,
    seed: u64,
    settings: &CovshiftSettings,
) -> Result<Vec<ExperimentRow>> {
    if runs == 0 {
        return Err(Error::invalid("at least one run is required"));
    }
    let per_run: Vec<Vec<f64>> = (0..runs)
        .into_par_iter()
        .map(|r| {
            covshift_run(scenario, schemes, settings, derive_seed(seed, r as u64))
                .map(|fits| fits.iter().map(|f| f.test_mse.unwrap()).collect())
        })
        .collect::<Result<_>>()?;
    Ok(schemes
        .iter()
        .enumerate()
        .map(|(k, &scheme)| {
            let mses: Vec<f64> = per_run.iter().map(|run| run[k]).collect();
            let s = Summary::of(&mses);
            ExperimentRow {
                scheme,
                mean_mse: s.mean,
                sd_mse: s.sd,
                runs,
            }
        })
        .collect())
}
