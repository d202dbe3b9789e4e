//! Dense solvers for the small regularized systems behind every fit.
//!
//! Systems are at most a few hundred unknowns. A row-major Cholesky
//! factorization handles the symmetric positive-definite case; a partially
//! pivoted LU takes over when the Cholesky pivots collapse.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

enum Factor {
    Cholesky(Vec<f64>),
    Lu { lu: Vec<f64>, perm: Vec<usize> },
}

/// Dot product with four independent accumulators so the loop vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn pivot_floor(a: &[f64], n: usize) -> f64 {
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max);
    (n as f64) * f64::EPSILON * scale.max(f64::MIN_POSITIVE)
}

/// Upper factor `U` with `A = U^T U`, computed by row-wise rank-one updates.
fn cholesky(mut a: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    let floor = pivot_floor(&a, n);
    for k in 0..n {
        let pivot = a[k * n + k];
        if !(pivot > floor) {
            return None;
        }
        let d = pivot.sqrt();
        let (done, rest) = a.split_at_mut((k + 1) * n);
        let row_k = &mut done[k * n + k..];
        row_k[0] = d;
        for v in &mut row_k[1..] {
            *v /= d;
        }
        let row_k = &row_k[1..];
        for (off, row_i) in rest.chunks_exact_mut(n).enumerate() {
            let i = k + 1 + off;
            let f = row_k[off];
            for (x, u) in row_i[i..].iter_mut().zip(&row_k[off..]) {
                *x -= f * u;
            }
        }
    }
    Some(a)
}

fn lu(mut a: Vec<f64>, n: usize) -> Option<(Vec<f64>, Vec<usize>)> {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = (n as f64) * f64::EPSILON * scale.max(f64::MIN_POSITIVE);
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&r, &s| a[r * n + k].abs().total_cmp(&a[s * n + k].abs()))
            .unwrap();
        if !(a[p * n + k].abs() > floor) {
            return None;
        }
        if p != k {
            for c in 0..n {
                a.swap(k * n + c, p * n + c);
            }
            perm.swap(k, p);
        }
        let pivot = a[k * n + k];
        for r in (k + 1)..n {
            let f = a[r * n + k] / pivot;
            a[r * n + k] = f;
            for c in (k + 1)..n {
                a[r * n + c] -= f * a[k * n + c];
            }
        }
    }
    Some((a, perm))
}

impl Factor {
    fn solve(&self, rhs: &[f64], n: usize) -> Vec<f64> {
        match self {
            Factor::Cholesky(u) => {
                let mut y = rhs.to_vec();
                for k in 0..n {
                    y[k] /= u[k * n + k];
                    let yk = y[k];
                    for (t, v) in y[k + 1..].iter_mut().zip(&u[k * n + k + 1..(k + 1) * n]) {
                        *t -= yk * v;
                    }
                }
                for i in (0..n).rev() {
                    y[i] = (y[i] - dot(&u[i * n + i + 1..(i + 1) * n], &y[i + 1..])) / u[i * n + i];
                }
                y
            }
            Factor::Lu { lu, perm } => {
                let mut y: Vec<f64> = perm.iter().map(|&p| rhs[p]).collect();
                for i in 0..n {
                    let dot: f64 = lu[i * n..i * n + i].iter().zip(&y[..i]).map(|(a, b)| a * b).sum();
                    y[i] -= dot;
                }
                for i in (0..n).rev() {
                    let dot: f64 = lu[i * n + i + 1..(i + 1) * n]
                        .iter()
                        .zip(&y[i + 1..])
                        .map(|(a, b)| a * b)
                        .sum();
                    y[i] = (y[i] - dot) / lu[i * n + i];
                }
                y
            }
        }
    }
}

/// Solves `(matrix + shift * I) x = rhs` for symmetric `matrix`.
///
/// One step of iterative refinement is applied to the result.
pub fn solve_shifted_symmetric(
    matrix: ArrayView2<f64>,
    rhs: ArrayView1<f64>,
    shift: f64,
) -> Result<Array1<f64>> {
    let n = rhs.len();
    if matrix.nrows() != n || matrix.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: matrix.nrows(),
        });
    }
    let mut a: Vec<f64> = match matrix.as_slice() {
        Some(s) => s.to_vec(),
        None => matrix.iter().copied().collect(),
    };
    for i in 0..n {
        a[i * n + i] += shift;
    }
    if !a.iter().chain(rhs.iter()).all(|v| v.is_finite()) {
        return Err(Error::NonFinite("linear system"));
    }
    let factor = match cholesky(a.clone(), n) {
        Some(l) => Factor::Cholesky(l),
        None => match lu(a.clone(), n) {
            Some((lu, perm)) => Factor::Lu { lu, perm },
            None => return Err(Error::Singular { size: n, lambda: shift }),
        },
    };
    let b: Vec<f64> = rhs.to_vec();
    let mut x = factor.solve(&b, n);
    let residual: Vec<f64> = (0..n)
        .map(|i| {
            b[i] - dot(&a[i * n..(i + 1) * n], &x)
        })
        .collect();
    let correction = factor.solve(&residual, n);
    for (xi, ci) in x.iter_mut().zip(correction) {
        *xi += ci;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular { size: n, lambda: shift });
    }
    Ok(Array1::from(x))
}

/// Max-norm residual `|(matrix + shift * I) x - rhs|_inf`.
pub fn shifted_residual(matrix: &Array2<f64>, x: &Array1<f64>, rhs: &Array1<f64>, shift: f64) -> f64 {
    let ax = matrix.dot(x) + &(x * shift);
    (&ax - rhs).iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn solves_spd_system() {
        let m = array![[4.0, 1.0], [1.0, 3.0]];
        let b = array![1.0, 2.0];
        let x = solve_shifted_symmetric(m.view(), b.view(), 0.0).unwrap();
        assert!(shifted_residual(&m, &x, &b, 0.0) < 1e-14);
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-15);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn indefinite_system_falls_back_to_lu() {
        let m = array![[0.0, 1.0], [1.0, 0.0]];
        let b = array![2.0, 3.0];
        let x = solve_shifted_symmetric(m.view(), b.view(), 0.0).unwrap();
        assert_eq!(x, array![3.0, 2.0]);
    }

    #[test]
    fn rank_deficient_is_singular() {
        let m = array![[1.0, 1.0], [1.0, 1.0]];
        let b = array![1.0, 1.0];
        assert!(matches!(
            solve_shifted_symmetric(m.view(), b.view(), 0.0),
            Err(Error::Singular { .. })
        ));
        assert!(solve_shifted_symmetric(m.view(), b.view(), 0.5).is_ok());
    }
}
