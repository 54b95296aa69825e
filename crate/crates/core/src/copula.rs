//! Rescaled empirical probability integral transform onto `(-1, 1)`.
//!
//! Exact zeros (inactive post-ReLU units) are tied en masse, so before
//! ranking each zero is replaced by a draw from `(-ZERO_JITTER, 0)`. This
//! gives the zeros a random strict order while keeping them below every
//! positive activation.

use ndarray::{Array2, ArrayView1};
use rand_distr::{Distribution, Open01};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::stats;
use crate::tensor_io::{self, FeatureSample, FeatureTensorFile};

/// Half-width of the jitter applied to exact zeros.
pub const ZERO_JITTER: f64 = 1e-9;

/// Sorted reference sample of one feature, fitted on training data.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    reference: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    pub fn n_ref(&self) -> usize {
        self.reference.len()
    }

    /// Mid-rank of `v` among the reference values, floored at 0.5.
    fn rank(&self, v: f64) -> f64 {
        let below = self.reference.partition_point(|&r| r < v);
        let at_or_below = self.reference.partition_point(|&r| r <= v);
        let ties = at_or_below - below;
        let r = if ties > 0 {
            below as f64 + (ties as f64 + 1.0) / 2.0
        } else {
            at_or_below as f64
        };
        r.max(0.5)
    }

    /// Maps one (already jittered) value to `(-1, 1)`.
    pub fn transform_value(&self, v: f64) -> f64 {
        2.0 * self.rank(v) / (self.reference.len() as f64 + 1.0) - 1.0
    }
}

/// Replaces exact zeros by independent draws from `(-ZERO_JITTER, 0)`.
pub fn jitter_zeros(values: &[f64], seed: u64) -> Vec<f64> {
    let mut rng = stats::rng(seed);
    values
        .iter()
        .map(|&v| {
            if v == 0.0 {
                let u: f64 = Open01.sample(&mut rng);
                -ZERO_JITTER * u
            } else {
                v
            }
        })
        .collect()
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().find(|v| !v.is_finite()) {
        Some(&v) => Err(Error::InvalidParameter(format!(
            "non-finite sample value {v}"
        ))),
        None => Ok(()),
    }
}

pub fn fit_cdf(train: &FeatureSample, jitter_seed: u64) -> Result<EmpiricalCdf> {
    if train.is_empty() {
        return Err(Error::EmptySample);
    }
    check_finite(&train.values)?;
    let mut reference = jitter_zeros(&train.values, jitter_seed);
    reference.sort_by(f64::total_cmp);
    Ok(EmpiricalCdf { reference })
}

/// Transforms `x` through a fitted CDF. Zeros in `x` are jittered with
/// `jitter_seed`; passing the seed used at fit time on the training sample
/// reproduces its exact ranks.
pub fn transform(cdf: &EmpiricalCdf, x: &FeatureSample, jitter_seed: u64) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::EmptySample);
    }
    check_finite(&x.values)?;
    Ok(jitter_zeros(&x.values, jitter_seed)
        .into_iter()
        .map(|v| cdf.transform_value(v))
        .collect())
}

/// Position-aligned copula sample: row `i` is the joint coordinate of
/// observation `i`, every entry strictly inside `(-1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CopulaMatrix {
    values: Array2<f64>,
    column_ids: Vec<usize>,
}

impl CopulaMatrix {
    pub fn new(values: Array2<f64>, column_ids: Vec<usize>) -> Result<Self> {
        if values.ncols() == 0 {
            return Err(Error::UnsupportedDimension(0));
        }
        if column_ids.len() != values.ncols() {
            return Err(Error::LengthMismatch {
                expected: values.ncols(),
                found: column_ids.len(),
            });
        }
        if let Some(&bad) = values.iter().find(|v| !(v.abs() < 1.0)) {
            return Err(Error::OutOfDomain { value: bad });
        }
        Ok(Self { values, column_ids })
    }

    pub fn from_columns(columns: &[Vec<f64>], column_ids: Vec<usize>) -> Result<Self> {
        let d = columns.len();
        if d == 0 {
            return Err(Error::UnsupportedDimension(0));
        }
        let n = columns[0].len();
        if let Some(bad) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::LengthMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        let values = Array2::from_shape_fn((n, d), |(i, j)| columns[j][i]);
        Self::new(values, column_ids)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn column_ids(&self) -> &[usize] {
        &self.column_ids
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    pub fn column(&self, d: usize) -> Vec<f64> {
        self.values.column(d).to_vec()
    }

    /// Rows `range` as a new matrix.
    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            values: self.values.slice(ndarray::s![range, ..]).to_owned(),
            column_ids: self.column_ids.clone(),
        }
    }

    /// Persists as an `[n, D, 1, 1]` tensor.
    pub fn to_tensor(&self) -> Result<FeatureTensorFile> {
        let columns: Vec<Vec<f64>> = (0..self.dim()).map(|d| self.column(d)).collect();
        tensor_io::pack_columns(&columns)
    }

    pub fn from_tensor(tensor: &FeatureTensorFile) -> Result<Self> {
        let [n, d, rows, cols] = tensor.shape4()?;
        if rows != 1 || cols != 1 {
            return Err(Error::Malformed(format!(
                "copula tensor must have dims [n, D, 1, 1], found spatial {rows}x{cols}"
            )));
        }
        let values = Array2::from_shape_fn((n, d), |(i, j)| tensor.data()[i * d + j] as f64);
        Self::new(values, (0..d).collect())
    }
}

/// Per-column jitter seed used by [`fit_cdfs`] and [`build_copula`].
pub fn column_seed(base: u64, column: usize) -> u64 {
    stats::derive_seed(base, column as u64)
}

/// Fits one CDF per sample, column `d` jittered with `column_seed(seed, d)`.
pub fn fit_cdfs(samples: &[FeatureSample], jitter_seed: u64) -> Result<Vec<EmpiricalCdf>> {
    samples
        .par_iter()
        .enumerate()
        .map(|(d, s)| fit_cdf(s, column_seed(jitter_seed, d)))
        .collect()
}

pub fn build_copula(
    cdfs: &[EmpiricalCdf],
    samples: &[FeatureSample],
    jitter_seed: u64,
) -> Result<CopulaMatrix> {
    if cdfs.len() != samples.len() {
        return Err(Error::LengthMismatch {
            expected: cdfs.len(),
            found: samples.len(),
        });
    }
    let Some(first) = samples.first() else {
        return Err(Error::UnsupportedDimension(0));
    };
    let n = first.len();
    if let Some(bad) = samples.iter().find(|s| s.len() != n) {
        return Err(Error::LengthMismatch {
            expected: n,
            found: bad.len(),
        });
    }
    let columns = cdfs
        .par_iter()
        .zip(samples.par_iter())
        .enumerate()
        .map(|(d, (cdf, s))| transform(cdf, s, column_seed(jitter_seed, d)))
        .collect::<Result<Vec<_>>>()?;
    CopulaMatrix::from_columns(&columns, samples.iter().map(|s| s.filter).collect())
}
