//! Reference oracles for testing the `rulsif` crate.
//!
//! Everything here is intentionally slow and self-contained: no code is
//! shared with the implementation under test, so agreement between the two
//! is meaningful.

use std::f64::consts::PI;
use std::fmt;

/// A stated acceptance interval `center ± abs_tol`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToleranceBand {
    pub center: f64,
    pub abs_tol: f64,
    pub description: String,
}

impl ToleranceBand {
    pub fn new(center: f64, abs_tol: f64, description: impl Into<String>) -> Self {
        assert!(abs_tol >= 0.0, "tolerance must be non-negative");
        Self {
            center,
            abs_tol,
            description: description.into(),
        }
    }

    /// Interval `[lo, hi]` expressed as a band.
    pub fn interval(lo: f64, hi: f64, description: impl Into<String>) -> Self {
        Self::new(0.5 * (lo + hi), 0.5 * (hi - lo), description)
    }

    /// Three-sigma band for a binomial proportion `p` estimated from `n` trials.
    pub fn binomial_3sigma(p: f64, n: usize, description: impl Into<String>) -> Self {
        Self::new(p, 3.0 * (p * (1.0 - p) / n as f64).sqrt(), description)
    }

    pub fn lo(&self) -> f64 {
        self.center - self.abs_tol
    }

    pub fn hi(&self) -> f64 {
        self.center + self.abs_tol
    }

    pub fn contains(&self, value: f64) -> bool {
        value.is_finite() && (value - self.center).abs() <= self.abs_tol
    }
}

impl fmt::Display for ToleranceBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:.6}, {:.6}] ({})", self.lo(), self.hi(), self.description)
    }
}

fn objective(h: &[Vec<f64>], hvec: &[f64], lambda: f64, theta: &[f64]) -> f64 {
    let b = theta.len();
    let mut quad = 0.0;
    for i in 0..b {
        for j in 0..b {
            quad += theta[i] * h[i][j] * theta[j];
        }
    }
    let lin: f64 = (0..b).map(|i| hvec[i] * theta[i]).sum();
    let ridge: f64 = theta.iter().map(|t| t * t).sum();
    0.5 * quad - lin + 0.5 * lambda * ridge
}

/// Value of `theta^T H theta / 2 - h^T theta + lambda |theta|^2 / 2`.
pub fn quadratic_objective(h: &[Vec<f64>], hvec: &[f64], lambda: f64, theta: &[f64]) -> f64 {
    objective(h, hvec, lambda, theta)
}

/// Minimizes the ridge-regularized quadratic objective by gradient descent.
///
/// The default step is `1 / L` with `L` a Gershgorin bound on the largest
/// eigenvalue of `H + lambda I`. Returns an error if the gradient has not
/// vanished (max-norm below 1e-12) within `iters` steps.
pub fn descent_minimize_objective(
    h: &[Vec<f64>],
    hvec: &[f64],
    lambda: f64,
    iters: usize,
    step: Option<f64>,
) -> Result<Vec<f64>, String> {
    let b = hvec.len();
    if b > 10 {
        return Err(format!("oracle limited to 10 unknowns, got {b}"));
    }
    let bound = h
        .iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        + lambda;
    let step = step.unwrap_or(1.0 / bound);
    let mut theta = vec![0.0; b];
    let mut grad = vec![0.0; b];
    for _ in 0..iters {
        for i in 0..b {
            grad[i] = (0..b).map(|j| h[i][j] * theta[j]).sum::<f64>() + lambda * theta[i] - hvec[i];
        }
        if grad.iter().all(|g| g.abs() < 1e-12) {
            return Ok(theta);
        }
        for i in 0..b {
            theta[i] -= step * grad[i];
        }
    }
    let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    if gmax < 1e-10 {
        Ok(theta)
    } else {
        Err(format!("descent did not converge: gradient {gmax:e} after {iters} steps"))
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(m: &[Vec<f64>]) -> Vec<f64> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

/// AUC by exhaustive pair counting: the fraction of (inlier, outlier) pairs
/// where the inlier scores higher, ties counting one half. `labels[i]` is
/// true for outliers. `None` if either class is empty.
pub fn brute_force_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len());
    let mut wins = 0u64;
    let mut ties = 0u64;
    let mut pairs = 0u64;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if !labels[j] {
                continue;
            }
            pairs += 1;
            if si > sj {
                wins += 1;
            } else if si == sj {
                ties += 1;
            }
        }
    }
    if pairs == 0 {
        return None;
    }
    Some((wins as f64 + 0.5 * ties as f64) / pairs as f64)
}

/// One weighted component `weight * N(mean, variance)` of a 1-D mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gauss1 {
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

impl Gauss1 {
    pub fn new(weight: f64, mean: f64, variance: f64) -> Self {
        Self { weight, mean, variance }
    }
}

pub fn mixture_density(mix: &[Gauss1], x: f64) -> f64 {
    mix.iter()
        .map(|c| c.weight * (-(x - c.mean).powi(2) / (2.0 * c.variance)).exp() / (2.0 * PI * c.variance).sqrt())
        .sum()
}

/// `p(x) / (alpha p(x) + (1 - alpha) p'(x))`.
pub fn relative_ratio(p: &[Gauss1], p_prime: &[Gauss1], alpha: f64, x: f64) -> f64 {
    let px = mixture_density(p, x);
    px / (alpha * px + (1.0 - alpha) * mixture_density(p_prime, x))
}

// 5-point Gauss-Legendre nodes and weights on [-1, 1].
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// Composite 5-point Gauss-Legendre rule with `panels` equal panels on `[lo, hi]`.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, panels: usize) -> f64 {
    let width = (hi - lo) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let mid = lo + (k as f64 + 0.5) * width;
        for (node, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
            total += w * f(mid + 0.5 * width * node);
        }
    }
    0.5 * width * total
}

/// Relative Pearson divergence `(1/2) ∫ (r_alpha - 1)^2 q_alpha` for 1-D mixtures.
pub fn quadrature_pe(p: &[Gauss1], p_prime: &[Gauss1], alpha: f64) -> f64 {
    let comps = p.iter().chain(p_prime);
    let lo = comps.clone().map(|c| c.mean - 40.0 * c.variance.sqrt()).fold(f64::INFINITY, f64::min);
    let hi = comps.map(|c| c.mean + 40.0 * c.variance.sqrt()).fold(f64::NEG_INFINITY, f64::max);
    let integrand = |x: f64| {
        let px = mixture_density(p, x);
        let q = alpha * px + (1.0 - alpha) * mixture_density(p_prime, x);
        if q <= 0.0 {
            0.0
        } else {
            0.5 * (px - q) * (px - q) / q
        }
    };
    gauss_legendre(integrand, lo, hi, 20_000)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self { mean, sd: var.sqrt(), n }
    }

    pub fn std_error(&self) -> f64 {
        self.sd / (self.n as f64).sqrt()
    }
}
