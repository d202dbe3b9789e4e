//! Seeded synthetic datasets and their exact densities.
//!
//! `N(mu, v)` always denotes a normal distribution with mean `mu` and
//! **variance** `v`: `N(0, 0.6)` has standard deviation `sqrt(0.6)` and
//! `N(1, 0.25)` has standard deviation 0.5.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::covshift::LabeledSet;
use crate::error::{Error, Result};
use crate::kernel::SampleSet;
use crate::rng::{derive_seed, rng_from_seed, StreamRng};

/// One weighted diagonal-covariance Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixtureSpec {
    components: Vec<MixtureComponent>,
    dim: usize,
}

impl GaussianMixtureSpec {
    pub fn new(components: Vec<MixtureComponent>) -> Result<Self> {
        let first = components.first().ok_or(Error::EmptyInput("mixture components"))?;
        let dim = first.mean.len();
        if dim == 0 {
            return Err(Error::invalid("mixture dimension must be positive"));
        }
        for c in &components {
            if c.mean.len() != dim || c.variance.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: if c.mean.len() != dim { c.mean.len() } else { c.variance.len() },
                });
            }
            if !(c.weight > 0.0 && c.weight.is_finite()) {
                return Err(Error::invalid("mixture weights must be positive"));
            }
            if c.variance.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::invalid("component variances must be positive and finite"));
            }
            if c.mean.iter().any(|m| !m.is_finite()) {
                return Err(Error::NonFinite("component mean"));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(Self { components, dim })
    }

    /// One-dimensional `N(mean, variance)`.
    pub fn normal(mean: f64, variance: f64) -> Result<Self> {
        Self::new(vec![MixtureComponent {
            weight: 1.0,
            mean: vec![mean],
            variance: vec![variance],
        }])
    }

    /// `N(mean, variance * I)`.
    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Result<Self> {
        let dim = mean.len();
        Self::new(vec![MixtureComponent {
            weight: 1.0,
            mean,
            variance: vec![variance; dim],
        }])
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn draw(&self, rng: &mut StreamRng, out: &mut Vec<f64>) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut which = self.components.len() - 1;
        for (k, c) in self.components.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                which = k;
                break;
            }
        }
        let c = &self.components[which];
        for (m, v) in c.mean.iter().zip(&c.variance) {
            let z: f64 = rng.sample(StandardNormal);
            out.push(m + v.sqrt() * z);
        }
        which
    }

    /// Draws `count` samples along with the index of the generating component.
    pub fn sample_with_components(&self, count: usize, seed: u64) -> Result<(SampleSet, Vec<usize>)> {
        if count == 0 {
            return Err(Error::invalid("sample count must be at least 1"));
        }
        let mut rng = rng_from_seed(seed);
        let mut data = Vec::with_capacity(count * self.dim);
        let which = (0..count).map(|_| self.draw(&mut rng, &mut data)).collect();
        Ok((SampleSet::new(data, self.dim)?, which))
    }

    pub fn sample(&self, count: usize, seed: u64) -> Result<SampleSet> {
        Ok(self.sample_with_components(count, seed)?.0)
    }

    pub fn density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(self
            .components
            .iter()
            .map(|c| {
                let mut log = 0.0;
                for ((xi, m), v) in x.iter().zip(&c.mean).zip(&c.variance) {
                    log -= 0.5 * ((xi - m) * (xi - m) / v + (2.0 * PI * v).ln());
                }
                c.weight * log.exp()
            })
            .sum())
    }
}

/// i.i.d. draws from `spec`; a pure function of `(spec, count, seed)`.
pub fn sample(spec: &GaussianMixtureSpec, count: usize, seed: u64) -> Result<SampleSet> {
    spec.sample(count, seed)
}

pub fn density(spec: &GaussianMixtureSpec, x: &[f64]) -> Result<f64> {
    spec.density(x)
}

/// Exact `p(x) / (alpha p(x) + (1 - alpha) p'(x))`.
pub fn true_relative_ratio(
    p: &GaussianMixtureSpec,
    p_prime: &GaussianMixtureSpec,
    alpha: f64,
    x: &[f64],
) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let px = p.density(x)?;
    let q = alpha * px + (1.0 - alpha) * p_prime.density(x)?;
    if q <= 0.0 {
        return Err(Error::invalid("mixture density vanishes at the query point"));
    }
    Ok(px / q)
}

/// The five one-dimensional numerator/denominator pairs. The numerator is
/// always `N(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DatasetTag {
    /// `P' = N(0, 1)`, identical to the numerator.
    A,
    /// `P' = N(0, 0.6)`, narrower.
    B,
    /// `P' = N(0, 2)`, wider.
    C,
    /// `P' = N(0.5, 1)`, shifted mean.
    D,
    /// `P' = 0.95 N(0, 1) + 0.05 N(3, 1)`, extra component.
    E,
}

impl DatasetTag {
    pub const ALL: [DatasetTag; 5] = [DatasetTag::A, DatasetTag::B, DatasetTag::C, DatasetTag::D, DatasetTag::E];

    /// `(numerator, denominator)` specs.
    pub fn specs(self) -> (GaussianMixtureSpec, GaussianMixtureSpec) {
        let p = GaussianMixtureSpec::normal(0.0, 1.0).unwrap();
        let p_prime = match self {
            DatasetTag::A => GaussianMixtureSpec::normal(0.0, 1.0),
            DatasetTag::B => GaussianMixtureSpec::normal(0.0, 0.6),
            DatasetTag::C => GaussianMixtureSpec::normal(0.0, 2.0),
            DatasetTag::D => GaussianMixtureSpec::normal(0.5, 1.0),
            DatasetTag::E => GaussianMixtureSpec::new(vec![
                MixtureComponent { weight: 0.95, mean: vec![0.0], variance: vec![1.0] },
                MixtureComponent { weight: 0.05, mean: vec![3.0], variance: vec![1.0] },
            ]),
        }
        .unwrap();
        (p, p_prime)
    }
}

impl fmt::Display for DatasetTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DatasetTag::A => "a",
            DatasetTag::B => "b",
            DatasetTag::C => "c",
            DatasetTag::D => "d",
            DatasetTag::E => "e",
        };
        f.write_str(s)
    }
}

impl FromStr for DatasetTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(DatasetTag::A),
            "b" => Ok(DatasetTag::B),
            "c" => Ok(DatasetTag::C),
            "d" => Ok(DatasetTag::D),
            "e" => Ok(DatasetTag::E),
            other => Err(Error::invalid(format!("unknown dataset tag '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PaperDataset {
    pub numerator: SampleSet,
    pub denominator: SampleSet,
    pub p: GaussianMixtureSpec,
    pub p_prime: GaussianMixtureSpec,
}

pub fn paper_dataset(tag: DatasetTag, n: usize, n_prime: usize, seed: u64) -> Result<PaperDataset> {
    let (p, p_prime) = tag.specs();
    Ok(PaperDataset {
        numerator: p.sample(n, derive_seed(seed, 0))?,
        denominator: p_prime.sample(n_prime, derive_seed(seed, 1))?,
        p,
        p_prime,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutlierDataset {
    /// Inlier-only reference samples.
    pub model: SampleSet,
    /// Samples to score; mixture of inliers and outliers.
    pub evaluation: SampleSet,
    /// `true` where the evaluation sample came from the outlier component.
    pub labels: Vec<bool>,
}

/// Specs of the outlier benchmark in `d` dimensions: inliers `N(0, I)` and
/// evaluation data `0.95 N(0, I) + 0.05 N(3 d^{-1/2} 1, I)`.
pub fn outlier_specs(d: usize) -> Result<(GaussianMixtureSpec, GaussianMixtureSpec)> {
    if d == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    let shift = 3.0 / (d as f64).sqrt();
    let inlier = GaussianMixtureSpec::isotropic(vec![0.0; d], 1.0)?;
    let evaluation = GaussianMixtureSpec::new(vec![
        MixtureComponent { weight: 0.95, mean: vec![0.0; d], variance: vec![1.0; d] },
        MixtureComponent { weight: 0.05, mean: vec![shift; d], variance: vec![1.0; d] },
    ])?;
    Ok((inlier, evaluation))
}

pub fn outlier_dataset(d: usize, n: usize, n_prime: usize, seed: u64) -> Result<OutlierDataset> {
    let (inlier, evaluation_spec) = outlier_specs(d)?;
    let model = inlier.sample(n, derive_seed(seed, 0))?;
    let (evaluation, which) = evaluation_spec.sample_with_components(n_prime, derive_seed(seed, 1))?;
    Ok(OutlierDataset {
        model,
        evaluation,
        labels: which.into_iter().map(|k| k == 1).collect(),
    })
}

/// Input distributions of the covariate-shift regression benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// Training and test inputs both `N(1, 0.25)`.
    NoShift,
    /// Training inputs `N(1, 0.25)`, test inputs `N(2, 0.1)`.
    Shift,
}

impl Scenario {
    pub fn input_specs(self) -> (GaussianMixtureSpec, GaussianMixtureSpec) {
        let train = GaussianMixtureSpec::normal(1.0, 0.25).unwrap();
        let test = match self {
            Scenario::NoShift => GaussianMixtureSpec::normal(1.0, 0.25),
            Scenario::Shift => GaussianMixtureSpec::normal(2.0, 0.1),
        }
        .unwrap();
        (train, test)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::NoShift => "no-shift",
            Scenario::Shift => "shift",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "no-shift" => Ok(Scenario::NoShift),
            "shift" => Ok(Scenario::Shift),
            other => Err(Error::invalid(format!("unknown scenario '{other}'"))),
        }
    }
}

/// Normalized sinc, `sin(pi x) / (pi x)` with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Variance of the additive target noise.
pub const SINC_NOISE_VARIANCE: f64 = 0.01;

fn labeled_sinc(inputs: SampleSet, seed: u64) -> Result<LabeledSet> {
    let mut rng = rng_from_seed(seed);
    let sd = SINC_NOISE_VARIANCE.sqrt();
    let targets = inputs
        .as_slice()
        .iter()
        .map(|&x| sinc(x) + sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    LabeledSet::new(inputs, targets)
}

/// `(train, test)` sets with targets `sinc(x) + N(0, 0.01)` noise.
pub fn sinc_dataset(scenario: Scenario, n_tr: usize, n_te: usize, seed: u64) -> Result<(LabeledSet, LabeledSet)> {
    let (train_spec, test_spec) = scenario.input_specs();
    let train = labeled_sinc(train_spec.sample(n_tr, derive_seed(seed, 0))?, derive_seed(seed, 1))?;
    let test = labeled_sinc(test_spec.sample(n_te, derive_seed(seed, 2))?, derive_seed(seed, 3))?;
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rulsif_testkit::gauss_legendre;

    #[test]
    fn standard_normal_moments() {
        let spec = GaussianMixtureSpec::normal(0.0, 1.0).unwrap();
        let s = spec.sample(10_000, 5).unwrap();
        let v = s.as_slice();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        assert!(mean.abs() < 4.0 / 100.0, "mean {mean}");
        assert!((var - 1.0).abs() < 0.06, "var {var}");
    }

    #[test]
    fn spec_invariants_enforced() {
        assert!(GaussianMixtureSpec::normal(0.0, 0.0).is_err());
        assert!(GaussianMixtureSpec::normal(0.0, -1.0).is_err());
        let bad_weights = vec![
            MixtureComponent { weight: 0.5, mean: vec![0.0], variance: vec![1.0] },
            MixtureComponent { weight: 0.4, mean: vec![1.0], variance: vec![1.0] },
        ];
        assert!(GaussianMixtureSpec::new(bad_weights).is_err());
        let bad_dims = vec![
            MixtureComponent { weight: 0.5, mean: vec![0.0], variance: vec![1.0] },
            MixtureComponent { weight: 0.5, mean: vec![1.0, 0.0], variance: vec![1.0, 1.0] },
        ];
        assert!(GaussianMixtureSpec::new(bad_dims).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let (_, e) = DatasetTag::E.specs();
        let a = e.sample(64, 99).unwrap();
        let b = e.sample(64, 99).unwrap();
        let bytes = |s: &SampleSet| s.as_slice().iter().flat_map(|v| v.to_le_bytes()).collect::<Vec<u8>>();
        assert_eq!(bytes(&a), bytes(&b));
        assert_ne!(a, e.sample(64, 100).unwrap());
    }

    #[test]
    fn density_values() {
        let spec = GaussianMixtureSpec::normal(0.0, 1.0).unwrap();
        assert!((spec.density(&[0.0]).unwrap() - 0.398_942_280_401_432_7).abs() < 1e-12);
        for x in [0.3, 1.7, 4.0] {
            assert_eq!(spec.density(&[x]).unwrap(), spec.density(&[-x]).unwrap());
        }
        assert!(spec.density(&[0.0, 1.0]).is_err());
        let (_, e) = DatasetTag::E.specs();
        assert!(e.density(&[50.0]).unwrap() >= 0.0);
    }

    #[test]
    fn densities_integrate_to_one() {
        for tag in DatasetTag::ALL {
            let (_, pp) = tag.specs();
            let total = gauss_legendre(|x| pp.density(&[x]).unwrap(), -30.0, 30.0, 3000);
            assert!((total - 1.0).abs() < 1e-6, "{tag}: {total}");
        }
    }

    #[test]
    fn relative_ratio_examples() {
        let (p, _) = DatasetTag::A.specs();
        for alpha in [0.0, 0.3, 0.9] {
            assert!((true_relative_ratio(&p, &p, alpha, &[1.3]).unwrap() - 1.0).abs() < 1e-15);
        }
        let (p, pb) = DatasetTag::B.specs();
        for x in [-4.0, 4.0] {
            assert!(true_relative_ratio(&p, &pb, 0.0, &[x]).unwrap() > 100.0);
            assert!(true_relative_ratio(&p, &pb, 0.5, &[x]).unwrap() < 2.0);
        }
        assert!(true_relative_ratio(&p, &pb, 1.5, &[0.0]).is_err());
    }

    #[test]
    fn paper_dataset_specs() {
        let a = paper_dataset(DatasetTag::A, 5, 6, 1).unwrap();
        assert_eq!(a.p, a.p_prime);
        assert_eq!((a.numerator.len(), a.denominator.len()), (5, 6));
        let e = paper_dataset(DatasetTag::E, 5, 5, 1).unwrap();
        let w: Vec<f64> = e.p_prime.components().iter().map(|c| c.weight).collect();
        assert_eq!(w, vec![0.95, 0.05]);
        let d = paper_dataset(DatasetTag::D, 5, 5, 1).unwrap();
        assert_eq!(d.p_prime.components()[0].mean, vec![0.5]);
        assert_eq!(d.p_prime.components()[0].variance, vec![1.0]);
        assert!("f".parse::<DatasetTag>().is_err());
        assert_eq!("D".parse::<DatasetTag>().unwrap(), DatasetTag::D);
    }

    #[test]
    fn outlier_dataset_shape_and_rate() {
        for d in [1, 4, 10] {
            let (_, eval) = outlier_specs(d).unwrap();
            let m = &eval.components()[1].mean;
            let norm = m.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 3.0).abs() < 1e-12);
        }
        let data = outlier_dataset(2, 30, 10_000, 7).unwrap();
        assert_eq!(data.labels.len(), 10_000);
        assert_eq!(data.model.len(), 30);
        let rate = data.labels.iter().filter(|&&l| l).count() as f64 / 10_000.0;
        let sd = (0.05f64 * 0.95 / 10_000.0).sqrt();
        assert!((rate - 0.05).abs() <= 3.0 * sd, "rate {rate}");
    }

    #[test]
    fn sinc_values_and_shift_inputs() {
        assert_eq!(sinc(0.0), 1.0);
        assert!(sinc(1.0).abs() < 1e-15);
        let (train, test) = sinc_dataset(Scenario::Shift, 10_000, 10, 3).unwrap();
        let x = train.inputs.as_slice();
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt();
        assert!((mean - 1.0).abs() < 4.0 * 0.5 / 100.0);
        assert!((sd - 0.5).abs() < 0.02);
        assert_eq!(test.targets.len(), 10);
    }
}
