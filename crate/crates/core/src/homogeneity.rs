//! Permutation two-sample homogeneity test on the relative Pearson divergence.
//!
//! The divergence from `x` to `x'` is estimated on the original split and on
//! `B` random re-splits of the pooled samples; the p-value is
//! `(1 + #{permuted >= observed}) / (B + 1)`. Because the divergence is
//! asymmetric, the test can run with `x` as numerator (plain), with the
//! roles swapped (reciprocal), or both, keeping the smaller p-value
//! (adaptive).

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::divergence::{pe_hat_from_values, pe_tilde_from_values};
use crate::error::{Error, Result};
use crate::estimator::{fit, fit_fixed, RulsifConfig, SigmaGrid};
use crate::kernel::{select_centers, SampleSet};
use crate::rng::{derive_seed, rng_from_seed};
use crate::stats::Summary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Plain,
    Reciprocal,
    Adaptive,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Plain => "plain",
            Direction::Reciprocal => "reciprocal",
            Direction::Adaptive => "adaptive",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Direction::Plain),
            "reciprocal" => Ok(Direction::Reciprocal),
            "adaptive" => Ok(Direction::Adaptive),
            other => Err(Error::invalid(format!("unknown direction '{other}'"))),
        }
    }
}

/// Which divergence estimate serves as the test statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Statistic {
    PeHat,
    PeTilde,
}

/// How much of the pipeline each permutation reruns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Refit {
    /// Full cross-validated fit on every permuted split.
    FullCv,
    /// Reuse the width and ridge selected on the original split. Approximate:
    /// the permutation distribution then ignores model-selection noise.
    FixedParameters,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestConfig {
    pub permutations: usize,
    pub significance: f64,
    pub direction: Direction,
    pub statistic: Statistic,
    pub refit: Refit,
    pub rulsif: RulsifConfig,
}

impl TestConfig {
    pub fn new(alpha: f64) -> Self {
        Self {
            permutations: 100,
            significance: 0.05,
            direction: Direction::Plain,
            statistic: Statistic::PeHat,
            refit: Refit::FullCv,
            rulsif: RulsifConfig::new(alpha),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.rulsif.alpha
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn with_permutations(mut self, permutations: usize) -> Self {
        self.permutations = permutations;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.permutations == 0 {
            return Err(Error::invalid("at least one permutation is required"));
        }
        if !(self.significance > 0.0 && self.significance < 1.0) {
            return Err(Error::invalid(format!(
                "significance must lie in (0, 1), got {}",
                self.significance
            )));
        }
        self.rulsif.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PermutationResult {
    pub p_value: f64,
    pub statistic: f64,
    pub permuted: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestOutcome {
    pub p_value: f64,
    pub p_plain: Option<f64>,
    pub p_reciprocal: Option<f64>,
    pub statistic: f64,
    pub permuted_statistics: Summary,
    pub reject: bool,
    pub direction_used: Direction,
}

/// `(1 + #{permuted >= observed}) / (B + 1)`.
pub fn permutation_p_value(observed: f64, permuted: &[f64]) -> f64 {
    let exceed = permuted.iter().filter(|&&d| d >= observed).count();
    (1 + exceed) as f64 / (permuted.len() + 1) as f64
}

fn divergence(
    numerator: &SampleSet,
    denominator: &SampleSet,
    config: &TestConfig,
    fixed: Option<(f64, f64)>,
) -> Result<f64> {
    let model = match fixed {
        None => fit(numerator, denominator, &config.rulsif)?,
        Some((sigma, lambda)) => {
            let centers = select_centers(numerator, config.rulsif.max_centers, config.rulsif.seed)?;
            fit_fixed(numerator, denominator, centers, sigma, lambda, config.rulsif.alpha)?
        }
    };
    let r_num = model.predict(numerator)?;
    let r_num = r_num.as_slice().unwrap();
    match config.statistic {
        Statistic::PeHat => {
            let r_den = model.predict(denominator)?;
            pe_hat_from_values(r_num, r_den.as_slice().unwrap(), config.rulsif.alpha)
        }
        Statistic::PeTilde => pe_tilde_from_values(r_num),
    }
}

/// One-direction permutation test with `x` as the ratio numerator.
pub fn permutation_pvalue(x: &SampleSet, x_prime: &SampleSet, config: &TestConfig, seed: u64) -> Result<PermutationResult> {
    config.validate()?;
    x.require_non_empty("first sample set")?;
    x_prime.require_non_empty("second sample set")?;
    x.check_dim(x_prime.dim())?;

    let pooled = x.concat(x_prime)?;
    // The pooled set, hence the median heuristic, is the same for every split.
    let mut config = config.clone();
    if let SigmaGrid::MedianScaled(_) = config.rulsif.sigma_grid {
        config.rulsif.sigma_grid = SigmaGrid::Fixed(config.rulsif.sigma_grid.resolve(x, x_prime)?);
    }

    let observed_model = match config.refit {
        Refit::FullCv => None,
        Refit::FixedParameters => Some(fit(x, x_prime, &config.rulsif)?.cv_report().expect("cross-validated").selected),
    };
    let observed = divergence(x, x_prime, &config, observed_model)?;

    let n = x.len();
    let permuted: Vec<f64> = (0..config.permutations)
        .into_par_iter()
        .map(|b| {
            let mut order: Vec<usize> = (0..pooled.len()).collect();
            order.shuffle(&mut rng_from_seed(derive_seed(seed, b as u64)));
            let shuffled = pooled.select(&order);
            let (left, right) = (shuffled.slice(0, n), shuffled.slice(n, pooled.len()));
            divergence(&left, &right, &config, observed_model)
        })
        .collect::<Result<_>>()?;

    Ok(PermutationResult {
        p_value: permutation_p_value(observed, &permuted),
        statistic: observed,
        permuted: Summary::of(&permuted),
    })
}

/// Least-squares two-sample test in the configured direction.
///
/// Plain and reciprocal runs use `seed` for their permutation stream, so a
/// plain test on swapped inputs reproduces a reciprocal test exactly. The
/// adaptive test runs the plain direction on `seed` and the reciprocal one
/// on an independent derived stream; ties go to plain.
pub fn lstt(x: &SampleSet, x_prime: &SampleSet, config: &TestConfig, seed: u64) -> Result<TestOutcome> {
    config.validate()?;
    let outcome = |r: PermutationResult, p_plain, p_reciprocal, direction_used| TestOutcome {
        p_value: r.p_value,
        p_plain,
        p_reciprocal,
        statistic: r.statistic,
        permuted_statistics: r.permuted,
        reject: r.p_value < config.significance,
        direction_used,
    };
    match config.direction {
        Direction::Plain => {
            let r = permutation_pvalue(x, x_prime, config, seed)?;
            let p = r.p_value;
            Ok(outcome(r, Some(p), None, Direction::Plain))
        }
        Direction::Reciprocal => {
            let r = permutation_pvalue(x_prime, x, config, seed)?;
            let p = r.p_value;
            Ok(outcome(r, None, Some(p), Direction::Reciprocal))
        }
        Direction::Adaptive => {
            let plain = permutation_pvalue(x, x_prime, config, seed)?;
            let recip = permutation_pvalue(x_prime, x, config, derive_seed(seed, u64::MAX))?;
            let (pp, pr) = (plain.p_value, recip.p_value);
            if pr < pp {
                Ok(outcome(recip, Some(pp), Some(pr), Direction::Reciprocal))
            } else {
                Ok(outcome(plain, Some(pp), Some(pr), Direction::Plain))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthdata::{paper_dataset, DatasetTag};

    #[test]
    fn p_value_formula_extremes() {
        let permuted: Vec<f64> = (0..100).map(|i| i as f64 * 0.001).collect();
        assert!((permutation_p_value(1.0, &permuted) - 1.0 / 101.0).abs() < 1e-15);
        assert_eq!(permutation_p_value(-1.0, &permuted), 1.0);
        assert_eq!(permutation_p_value(0.0995, &permuted), 1.0 / 101.0 + 0.0);
        assert_eq!(permutation_p_value(0.5, &[0.5]), 1.0);
    }

    fn quick(alpha: f64) -> TestConfig {
        let mut c = TestConfig::new(alpha).with_permutations(9);
        c.rulsif = c.rulsif.with_lambda_grid(vec![0.01, 0.1]);
        c
    }

    #[test]
    fn swapping_inputs_matches_reciprocal() {
        let data = paper_dataset(DatasetTag::D, 40, 30, 5).unwrap();
        let plain_swapped = lstt(&data.denominator, &data.numerator, &quick(0.5), 11).unwrap();
        let recip = lstt(
            &data.numerator,
            &data.denominator,
            &quick(0.5).with_direction(Direction::Reciprocal),
            11,
        )
        .unwrap();
        assert_eq!(plain_swapped.p_value, recip.p_value);
        assert_eq!(plain_swapped.statistic, recip.statistic);
        assert_eq!(plain_swapped.permuted_statistics, recip.permuted_statistics);
        assert_eq!(recip.direction_used, Direction::Reciprocal);
    }

    #[test]
    fn adaptive_takes_the_minimum() {
        let data = paper_dataset(DatasetTag::B, 40, 40, 6).unwrap();
        let cfg = quick(0.5).with_direction(Direction::Adaptive);
        let out = lstt(&data.numerator, &data.denominator, &cfg, 3).unwrap();
        let (pp, pr) = (out.p_plain.unwrap(), out.p_reciprocal.unwrap());
        assert_eq!(out.p_value, pp.min(pr));
        assert_eq!(out.reject, out.p_value < cfg.significance);
        let plain = lstt(&data.numerator, &data.denominator, &quick(0.5), 3).unwrap();
        assert_eq!(plain.p_value, pp);
        assert!(out.p_value <= plain.p_value);
    }

    #[test]
    fn p_value_bounds_and_determinism() {
        let data = paper_dataset(DatasetTag::A, 30, 30, 8).unwrap();
        let mut cfg = quick(0.5);
        cfg.permutations = 1;
        let r1 = permutation_pvalue(&data.numerator, &data.denominator, &cfg, 1).unwrap();
        assert!(r1.p_value == 0.5 || r1.p_value == 1.0);
        cfg.permutations = 9;
        let a = permutation_pvalue(&data.numerator, &data.denominator, &cfg, 2).unwrap();
        let b = permutation_pvalue(&data.numerator, &data.denominator, &cfg, 2).unwrap();
        assert_eq!(a, b);
        assert!(a.p_value > 0.0 && a.p_value <= 1.0);
        assert_eq!(a.permuted.count, 9);
    }

    #[test]
    fn fixed_parameter_mode_and_tilde_statistic_run() {
        let data = paper_dataset(DatasetTag::D, 40, 40, 9).unwrap();
        let mut cfg = quick(0.5);
        cfg.refit = Refit::FixedParameters;
        cfg.statistic = Statistic::PeTilde;
        let r = lstt(&data.numerator, &data.denominator, &cfg, 4).unwrap();
        assert!(r.p_value > 0.0 && r.p_value <= 1.0);
    }

    #[test]
    fn config_validation() {
        let data = paper_dataset(DatasetTag::A, 10, 10, 1).unwrap();
        let mut cfg = quick(0.5);
        cfg.significance = 1.5;
        assert!(lstt(&data.numerator, &data.denominator, &cfg, 0).is_err());
        let cfg = quick(0.5).with_permutations(0);
        assert!(lstt(&data.numerator, &data.denominator, &cfg, 0).is_err());
        assert_eq!("adaptive".parse::<Direction>().unwrap(), Direction::Adaptive);
        assert!("sideways".parse::<Direction>().is_err());
    }
}
