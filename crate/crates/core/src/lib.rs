//! Relative density-ratio estimation by least-squares fitting (RuLSIF).
//!
//! The relative ratio `r_a(x) = p(x) / (a p(x) + (1 - a) p'(x))` between a
//! numerator density `p` and a denominator density `p'` is bounded above by
//! `1 / a` for `a > 0`, which makes it far easier to estimate than the plain
//! ratio `p / p'`. This crate fits it in closed form from two sample sets
//! and builds on it:
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`kernel`] | Gaussian kernels, design matrices, median heuristic, centers |
//! | [`estimator`] | Closed-form ratio fit with cross-validated width and ridge |
//! | [`divergence`] | Relative Pearson divergence estimates and 1-D ground truth |
//! | [`homogeneity`] | Permutation two-sample test on the divergence |
//! | [`outlier`] | Inlier-based outlier scores and AUC |
//! | [`covshift`] | Importance-weighted kernel regression under covariate shift |
//! | [`synthdata`] | Seeded Gaussian-mixture generators and density oracles |

pub mod covshift;
pub mod divergence;
pub mod error;
pub mod estimator;
pub mod homogeneity;
pub mod kernel;
pub mod linalg;
pub mod outlier;
pub mod rng;
pub mod stats;
pub mod synthdata;

pub use error::{Error, Result};
pub use estimator::{fit, predict, CvEntry, CvReport, RulsifConfig, RulsifModel, SigmaGrid};
pub use kernel::{KernelSpec, SampleSet};
