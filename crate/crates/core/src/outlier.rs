//! Inlier-based outlier scoring.
//!
//! The clean model set plays the numerator and the evaluation set the
//! denominator, so the fitted ratio is near one on inlier regions and near
//! zero where the evaluation set has mass the model set lacks. Lower scores
//! mean more outlying; negative estimates are kept as they are.

use crate::error::{Error, Result};
use crate::estimator::{fit, RulsifConfig, RulsifModel};
use crate::kernel::SampleSet;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet {
    pub scores: Vec<f64>,
    /// `true` marks a known outlier.
    pub labels: Option<Vec<bool>>,
}

impl ScoredSet {
    pub fn new(scores: Vec<f64>, labels: Option<Vec<bool>>) -> Result<Self> {
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("scores"));
        }
        if let Some(l) = &labels {
            if l.len() != scores.len() {
                return Err(Error::DimensionMismatch {
                    expected: scores.len(),
                    found: l.len(),
                });
            }
        }
        Ok(Self { scores, labels })
    }

    pub fn with_labels(self, labels: Vec<bool>) -> Result<Self> {
        Self::new(self.scores, Some(labels))
    }
}

/// Fits the ratio of the model-set density to the evaluation-set density.
pub fn fit_outlier_model(model_set: &SampleSet, evaluation_set: &SampleSet, config: &RulsifConfig) -> Result<RulsifModel> {
    fit(model_set, evaluation_set, config)
}

/// Scores each evaluation sample by its estimated ratio value.
pub fn outlier_scores(model_set: &SampleSet, evaluation_set: &SampleSet, config: &RulsifConfig) -> Result<ScoredSet> {
    let model = fit_outlier_model(model_set, evaluation_set, config)?;
    ScoredSet::new(model.predict(evaluation_set)?.to_vec(), None)
}

/// Ascending midranks (1-based) of `values`, ties sharing their average rank.
fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end share their mean
        let rank = 0.5 * ((start + 1 + end) as f64);
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Probability that a random inlier outscores a random outlier, ties
/// counting one half (Mann-Whitney statistic over midranks).
pub fn auc(scored: &ScoredSet) -> Result<f64> {
    let labels = scored.labels.as_ref().ok_or(Error::MissingLabels)?;
    let n_out = labels.iter().filter(|&&l| l).count();
    let n_in = labels.len() - n_out;
    if n_in == 0 || n_out == 0 {
        return Err(Error::SingleClass);
    }
    let ranks = midranks(&scored.scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| !l).map(|(r, _)| r).sum();
    let u = rank_sum - (n_in * (n_in + 1)) as f64 / 2.0;
    Ok(u / (n_in * n_out) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthdata::GaussianMixtureSpec;
    use proptest::prelude::*;
    use rulsif_testkit::brute_force_auc;

    fn scored(scores: &[f64], labels: &[bool]) -> ScoredSet {
        ScoredSet::new(scores.to_vec(), Some(labels.to_vec())).unwrap()
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&scored(&[0.9, 0.8, 0.1, 0.05], &[false, false, true, true])).unwrap(), 1.0);
        assert_eq!(auc(&scored(&[0.9, 0.8, 0.7], &[false, true, false])).unwrap(), 0.5);
        assert_eq!(auc(&scored(&[0.4; 5], &[false, true, false, true, false])).unwrap(), 0.5);
    }

    #[test]
    fn auc_errors() {
        assert_eq!(auc(&ScoredSet::new(vec![0.1, 0.2], None).unwrap()), Err(Error::MissingLabels));
        assert_eq!(auc(&scored(&[0.1, 0.2], &[false, false])), Err(Error::SingleClass));
        assert!(ScoredSet::new(vec![0.1], Some(vec![true, false])).is_err());
        assert!(ScoredSet::new(vec![f64::NAN], None).is_err());
    }

    #[test]
    fn far_points_score_low_and_dense_points_high() {
        let inliers = GaussianMixtureSpec::normal(0.0, 1.0).unwrap().sample(200, 1).unwrap();
        let mut eval: Vec<f64> = GaussianMixtureSpec::normal(0.0, 1.0).unwrap().sample(99, 2).unwrap().as_slice().to_vec();
        eval.push(9.0);
        eval[0] = 0.0;
        let eval = SampleSet::from_scalars(&eval).unwrap();
        let s = outlier_scores(&inliers, &eval, &RulsifConfig::new(0.0).with_seed(4)).unwrap();
        assert_eq!(s.scores.len(), 100);
        let far = s.scores[99];
        assert!(far.abs() < 0.05, "far score {far}");
        let max = s.scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = s.scores.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(s.scores[0] > min + 0.75 * (max - min), "center score {}", s.scores[0]);
    }

    fn labeled_scores() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
        (2usize..120).prop_flat_map(|n| {
            (
                prop::collection::vec(prop_oneof![(-3i32..3).prop_map(f64::from), -3.0..3.0f64], n),
                prop::collection::vec(any::<bool>(), n),
            )
        })
    }

    proptest! {
        #[test]
        fn auc_equals_pair_count((scores, mut labels) in labeled_scores()) {
            labels[0] = false;
            labels[1] = true;
            let s = scored(&scores, &labels);
            prop_assert_eq!(auc(&s).unwrap(), brute_force_auc(&scores, &labels).unwrap());
        }

        #[test]
        fn auc_invariant_under_monotone_transform((scores, mut labels) in labeled_scores()) {
            labels[0] = false;
            labels[1] = true;
            let a = auc(&scored(&scores, &labels)).unwrap();
            let mapped: Vec<f64> = scores.iter().map(|s| (0.7 * s).exp() + 2.0).collect();
            prop_assert_eq!(a, auc(&scored(&mapped, &labels)).unwrap());
            let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
            prop_assert!((auc(&scored(&scores, &flipped)).unwrap() - (1.0 - a)).abs() < 1e-12);
        }
    }
}
