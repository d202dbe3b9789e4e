//! Relative Pearson divergence.
//!
//! `PE_a = (1/2) E_{q_a}[(r_a - 1)^2]` with `q_a = a p + (1 - a) p'`. Two
//! plug-in estimators are provided, both evaluated on the ratio model's
//! outputs:
//!
//! ```text
//! pe_hat   = -(a / 2n) sum r(x_i)^2 - ((1 - a) / 2n') sum r(x'_j)^2 + (1/n) sum r(x_i) - 1/2
//! pe_tilde = (1 / 2n) sum r(x_i) - 1/2
//! ```

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::RulsifModel;
use crate::kernel::SampleSet;
use crate::synthdata::GaussianMixtureSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DivergenceEstimate {
    pub alpha: f64,
    pub pe_hat: f64,
    pub pe_tilde: f64,
    pub n: usize,
    pub n_prime: usize,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn pe_hat_from_values(r_num: &[f64], r_den: &[f64], alpha: f64) -> Result<f64> {
    if r_num.is_empty() || r_den.is_empty() {
        return Err(Error::EmptyInput("divergence samples"));
    }
    let sq_num = r_num.iter().map(|r| r * r).sum::<f64>() / r_num.len() as f64;
    let sq_den = r_den.iter().map(|r| r * r).sum::<f64>() / r_den.len() as f64;
    Ok(-0.5 * alpha * sq_num - 0.5 * (1.0 - alpha) * sq_den + mean(r_num) - 0.5)
}

pub fn pe_tilde_from_values(r_num: &[f64]) -> Result<f64> {
    if r_num.is_empty() {
        return Err(Error::EmptyInput("divergence samples"));
    }
    Ok(0.5 * mean(r_num) - 0.5)
}

fn outputs(model: &RulsifModel, set: &SampleSet, what: &'static str) -> Result<Vec<f64>> {
    set.require_non_empty(what)?;
    Ok(model.predict(set)?.to_vec())
}

/// Estimator using both sample sets; `alpha` is taken from the model.
pub fn pe_hat(model: &RulsifModel, numerator: &SampleSet, denominator: &SampleSet) -> Result<f64> {
    let r_num = outputs(model, numerator, "numerator samples")?;
    let r_den = outputs(model, denominator, "denominator samples")?;
    pe_hat_from_values(&r_num, &r_den, model.alpha())
}

/// Estimator using the numerator samples only.
pub fn pe_tilde(model: &RulsifModel, numerator: &SampleSet) -> Result<f64> {
    pe_tilde_from_values(&outputs(model, numerator, "numerator samples")?)
}

/// Both estimates, evaluated on the given sets (normally the fitting samples).
pub fn estimate(model: &RulsifModel, numerator: &SampleSet, denominator: &SampleSet) -> Result<DivergenceEstimate> {
    let r_num = outputs(model, numerator, "numerator samples")?;
    let r_den = outputs(model, denominator, "denominator samples")?;
    Ok(DivergenceEstimate {
        alpha: model.alpha(),
        pe_hat: pe_hat_from_values(&r_num, &r_den, model.alpha())?,
        pe_tilde: pe_tilde_from_values(&r_num)?,
        n: numerator.len(),
        n_prime: denominator.len(),
    })
}

fn simpson(a: f64, fa: f64, fm: f64, b: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    fa: f64,
    m: f64,
    fm: f64,
    b: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, fa, flm, m, fm);
    let right = simpson(m, fm, frm, b, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, fa, lm, flm, m, fm, left, 0.5 * tol, depth - 1)
        + adaptive(f, m, fm, rm, frm, b, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson integration of `f` over `[lo, hi]`, absolute tolerance `tol`.
pub(crate) fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> f64 {
    // Seed panels keep narrow features from being skipped by the first estimate.
    const PANELS: usize = 48;
    let width = (hi - lo) / PANELS as f64;
    (0..PANELS)
        .map(|k| {
            let a = lo + k as f64 * width;
            let b = a + width;
            let m = 0.5 * (a + b);
            let (fa, fm, fb) = (f(a), f(m), f(b));
            adaptive(&f, a, fa, m, fm, b, fb, simpson(a, fa, fm, b, fb), tol / PANELS as f64, 40)
        })
        .sum()
}

/// Ground-truth relative Pearson divergence of two 1-D mixtures by quadrature.
///
/// Integrates over 12 standard deviations either side of every component.
pub fn true_pe_oracle(p: &GaussianMixtureSpec, p_prime: &GaussianMixtureSpec, alpha: f64) -> Result<f64> {
    for spec in [p, p_prime] {
        if spec.dim() != 1 {
            return Err(Error::UnsupportedDimension(spec.dim()));
        }
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let comps = p.components().iter().chain(p_prime.components());
    let lo = comps
        .clone()
        .map(|c| c.mean[0] - 12.0 * c.variance[0].sqrt())
        .fold(f64::INFINITY, f64::min);
    let hi = comps
        .map(|c| c.mean[0] + 12.0 * c.variance[0].sqrt())
        .fold(f64::NEG_INFINITY, f64::max);
    let integrand = |x: f64| {
        let px = p.density(&[x]).unwrap_or(0.0);
        let q = alpha * px + (1.0 - alpha) * p_prime.density(&[x]).unwrap_or(0.0);
        if q > 0.0 {
            0.5 * (px - q) * (px - q) / q
        } else {
            0.0
        }
    };
    Ok(integrate(integrand, lo, hi, 1e-9))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::Provenance;
    use crate::kernel::KernelSpec;
    use crate::synthdata::DatasetTag;
    use ndarray::array;

    const PE_D_ALPHA0: f64 = 0.142_012_708_343_871_1;

    fn constant_model(value: f64, alpha: f64) -> RulsifModel {
        let spec = KernelSpec::new(1.0, SampleSet::from_scalars(&[0.0]).unwrap()).unwrap();
        RulsifModel::from_parts(spec, alpha, 0.0, array![value], 0, Provenance::Fixed).unwrap()
    }

    #[test]
    fn closed_form_constant() {
        assert!((PE_D_ALPHA0 - 0.5 * (0.25f64.exp() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn constant_ratio_substitutions() {
        // every point sits on the single center, so r = theta exactly
        let at_center = SampleSet::from_scalars(&[0.0; 4]).unwrap();
        for alpha in [0.0, 0.4, 0.95] {
            let one = constant_model(1.0, alpha);
            assert!(pe_hat(&one, &at_center, &at_center).unwrap().abs() < 1e-15);
            assert!(pe_tilde(&one, &at_center).unwrap().abs() < 1e-15);
            let zero = constant_model(0.0, alpha);
            assert_eq!(pe_hat(&zero, &at_center, &at_center).unwrap(), -0.5);
        }
        assert_eq!(pe_tilde(&constant_model(3.0, 0.5), &at_center).unwrap(), 1.0);
        let est = estimate(&constant_model(1.0, 0.5), &at_center, &at_center).unwrap();
        assert_eq!((est.n, est.n_prime), (4, 4));
    }

    #[test]
    fn empty_sets_rejected() {
        let model = constant_model(1.0, 0.5);
        let empty = SampleSet::from_scalars(&[]).unwrap();
        let one = SampleSet::from_scalars(&[0.0]).unwrap();
        assert!(pe_hat(&model, &empty, &one).is_err());
        assert!(pe_hat(&model, &one, &empty).is_err());
        assert!(pe_tilde(&model, &empty).is_err());
    }

    #[test]
    fn oracle_known_values() {
        let (p, pa) = DatasetTag::A.specs();
        for alpha in [0.0, 0.5, 0.95] {
            assert!(true_pe_oracle(&p, &pa, alpha).unwrap().abs() < 1e-12);
        }
        let (p, pd) = DatasetTag::D.specs();
        assert!((true_pe_oracle(&p, &pd, 0.0).unwrap() - PE_D_ALPHA0).abs() < 1e-7);
        let values: Vec<f64> = [0.0, 0.5, 0.95].iter().map(|&a| true_pe_oracle(&p, &pd, a).unwrap()).collect();
        assert!(values[0] > values[1] && values[1] > values[2] && values[2] > 0.0);
    }

    #[test]
    fn oracle_non_negative_and_one_dimensional() {
        for tag in DatasetTag::ALL {
            let (p, pp) = tag.specs();
            for alpha in [0.0, 0.25, 0.5, 0.95] {
                assert!(true_pe_oracle(&p, &pp, alpha).unwrap() >= -1e-9);
            }
        }
        let two = GaussianMixtureSpec::isotropic(vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(
            true_pe_oracle(&two, &two, 0.5),
            Err(Error::UnsupportedDimension(2))
        );
    }

    #[test]
    fn oracle_matches_independent_quadrature() {
        use rulsif_testkit::{quadrature_pe, Gauss1};
        let convert = |s: &GaussianMixtureSpec| -> Vec<Gauss1> {
            s.components().iter().map(|c| Gauss1::new(c.weight, c.mean[0], c.variance[0])).collect()
        };
        for tag in DatasetTag::ALL {
            let (p, pp) = tag.specs();
            for alpha in [0.0, 0.5, 0.95] {
                let a = true_pe_oracle(&p, &pp, alpha).unwrap();
                let b = quadrature_pe(&convert(&p), &convert(&pp), alpha);
                assert!((a - b).abs() < 1e-5, "{tag} alpha={alpha}: {a} vs {b}");
            }
        }
    }
}
