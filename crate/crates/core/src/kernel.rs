//! Gaussian kernel evaluation, design matrices, and center selection.

use ndarray::Array2;
use rand::seq::index;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// An ordered collection of `dim`-dimensional finite vectors, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    data: Vec<f64>,
    dim: usize,
}

impl SampleSet {
    /// Builds a set from a flat row-major buffer.
    pub fn new(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("sample dimension must be positive"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: data.len() % dim,
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample set"));
        }
        Ok(Self { data, dim })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyInput("sample set"))?;
        let dim = first.as_ref().len();
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(data, dim)
    }

    /// One-dimensional samples.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec(), 1)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// Flat row-major view of the samples.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// New set holding the rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> SampleSet {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        SampleSet {
            data,
            dim: self.dim,
        }
    }

    /// Rows `start..end` as a new set.
    pub fn slice(&self, start: usize, end: usize) -> SampleSet {
        SampleSet {
            data: self.data[start * self.dim..end * self.dim].to_vec(),
            dim: self.dim,
        }
    }

    /// `self` followed by `other`.
    pub fn concat(&self, other: &SampleSet) -> Result<SampleSet> {
        self.check_dim(other.dim)?;
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(SampleSet {
            data,
            dim: self.dim,
        })
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim != dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: dim,
            });
        }
        Ok(())
    }

    pub(crate) fn require_non_empty(&self, what: &'static str) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptyInput(what));
        }
        Ok(())
    }
}

/// Gaussian kernel width together with the centers it is expanded around.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    width: f64,
    centers: SampleSet,
}

impl KernelSpec {
    pub fn new(width: f64, centers: SampleSet) -> Result<Self> {
        check_width(width)?;
        centers.require_non_empty("kernel centers")?;
        Ok(Self { width, centers })
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn centers(&self) -> &SampleSet {
        &self.centers
    }

    pub fn num_centers(&self) -> usize {
        self.centers.len()
    }
}

fn check_width(sigma: f64) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!(
            "kernel width must be positive and finite, got {sigma}"
        )));
    }
    Ok(())
}

#[inline]
pub(crate) fn squared_distance(x: &[f64], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `exp(-|x - c|^2 / (2 sigma^2))`.
pub fn gaussian_kernel(x: &[f64], c: &[f64], sigma: f64) -> Result<f64> {
    if x.len() != c.len() {
        return Err(Error::DimensionMismatch {
            expected: c.len(),
            found: x.len(),
        });
    }
    check_width(sigma)?;
    Ok((-squared_distance(x, c) / (2.0 * sigma * sigma)).exp())
}

/// Design matrix with entry `(i, l) = K(points[i], centers[l])`.
pub fn kernel_matrix(points: &SampleSet, spec: &KernelSpec) -> Result<Array2<f64>> {
    spec.centers.check_dim(points.dim())?;
    let b = spec.num_centers();
    let scale = -1.0 / (2.0 * spec.width * spec.width);
    let mut out = Array2::<f64>::zeros((points.len(), b));
    for (x, mut row) in points.rows().zip(out.rows_mut()) {
        for (c, v) in spec.centers.rows().zip(row.iter_mut()) {
            *v = (squared_distance(x, c) * scale).exp();
        }
    }
    Ok(out)
}

/// Median of the `len * (len - 1) / 2` pairwise Euclidean distances.
///
/// Used to anchor kernel-width grids. Coincident point sets are rejected
/// because they have no length scale.
pub fn median_pairwise_distance(points: &SampleSet) -> Result<f64> {
    let n = points.len();
    if n < 2 {
        return Err(Error::invalid(
            "median pairwise distance needs at least two points",
        ));
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        let xi = points.row(i);
        for j in (i + 1)..n {
            dists.push(squared_distance(xi, points.row(j)).sqrt());
        }
    }
    let m = dists.len();
    let mid = m / 2;
    let (lower, upper, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    let median = if m % 2 == 1 {
        upper
    } else {
        let lower_max = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower_max + upper)
    };
    if median <= 0.0 {
        return Err(Error::DegenerateGeometry);
    }
    Ok(median)
}

/// Picks at most `max_centers` numerator samples as kernel centers.
///
/// Small sets are returned unchanged. Larger ones are subsampled uniformly
/// without replacement; the chosen rows keep their original relative order.
pub fn select_centers(numerator: &SampleSet, max_centers: usize, seed: u64) -> Result<SampleSet> {
    numerator.require_non_empty("numerator samples")?;
    if max_centers == 0 {
        return Err(Error::invalid("max_centers must be at least 1"));
    }
    let n = numerator.len();
    if n <= max_centers {
        return Ok(numerator.clone());
    }
    let mut rng = rng_from_seed(seed);
    let mut picked = index::sample(&mut rng, n, max_centers).into_vec();
    picked.sort_unstable();
    Ok(numerator.select(&picked))
}
