//! Dense D-dimensional histogram over the copula cube `(-1, 1)^D`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::CopulaMatrix;
use crate::error::{Error, Result};

/// Largest number of cells a grid may allocate.
pub const DEFAULT_CELL_CAP: usize = 1 << 26;

/// Default bins per dimension: 16 for pairwise plots, 6 for groups of four.
pub fn default_bins(dim: usize) -> usize {
    if dim <= 2 {
        16
    } else {
        6
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramGrid {
    dim: usize,
    bins: usize,
    counts: Vec<u64>,
    n: u64,
}

/// Lower edge of bin `j` out of `bins`.
fn edge(j: usize, bins: usize) -> f64 {
    -1.0 + 2.0 * j as f64 / bins as f64
}

/// Bin of a coordinate; a value on an interior edge goes to the upper bin.
fn bin_of(y: f64, bins: usize) -> usize {
    let mut k = (((y + 1.0) * bins as f64 / 2.0).floor().max(0.0) as usize).min(bins - 1);
    if k + 1 < bins && y >= edge(k + 1, bins) {
        k += 1;
    } else if k > 0 && y < edge(k, bins) {
        k -= 1;
    }
    k
}

impl HistogramGrid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn cell_volume(&self) -> f64 {
        (2.0 / self.bins as f64).powi(self.dim as i32)
    }

    /// Row-major cell index, first coordinate most significant.
    pub fn cell_index(&self, y: &[f64]) -> usize {
        y.iter()
            .fold(0, |acc, &v| acc * self.bins + bin_of(v, self.bins))
    }

    pub fn cell_density(&self, cell: usize) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        self.counts[cell] as f64 / (self.n as f64 * self.cell_volume())
    }

    /// Unclamped density at `y`, which must lie inside the open cube.
    pub fn density(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: y.len(),
            });
        }
        if let Some(&bad) = y.iter().find(|v| !(v.abs() < 1.0)) {
            return Err(Error::OutOfDomain { value: bad });
        }
        Ok(self.cell_density(self.cell_index(y)))
    }

    /// Aggregates blocks of `factor^D` cells into one.
    pub fn coarsen(&self, factor: usize) -> Result<HistogramGrid> {
        if factor == 0 || !self.bins.is_multiple_of(factor) {
            return Err(Error::InvalidParameter(format!(
                "coarsening factor {factor} does not divide {} bins",
                self.bins
            )));
        }
        let bins = self.bins / factor;
        let mut counts = vec![0u64; bins.pow(self.dim as u32)];
        for (cell, &c) in self.counts.iter().enumerate() {
            let mut rest = cell;
            let mut coarse = 0;
            let mut stride = 1;
            for _ in 0..self.dim {
                coarse += (rest % self.bins) / factor * stride;
                rest /= self.bins;
                stride *= bins;
            }
            counts[coarse] += c;
        }
        Ok(HistogramGrid {
            dim: self.dim,
            bins,
            counts,
            n: self.n,
        })
    }

    /// Cellwise sum of two grids over the same binning.
    pub fn merge(&self, other: &HistogramGrid) -> Result<HistogramGrid> {
        if self.dim != other.dim || self.bins != other.bins {
            return Err(Error::SpecMismatch(format!(
                "grids {}^{} and {}^{}",
                self.bins, self.dim, other.bins, other.dim
            )));
        }
        Ok(HistogramGrid {
            dim: self.dim,
            bins: self.bins,
            counts: self
                .counts
                .iter()
                .zip(&other.counts)
                .map(|(a, b)| a + b)
                .collect(),
            n: self.n + other.n,
        })
    }
}

pub fn fit_hist(copula: &CopulaMatrix, bins: usize) -> Result<HistogramGrid> {
    fit_hist_capped(copula, bins, DEFAULT_CELL_CAP)
}

pub fn fit_hist_capped(copula: &CopulaMatrix, bins: usize, cap: usize) -> Result<HistogramGrid> {
    if bins < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 bins, got {bins}"
        )));
    }
    let dim = copula.dim();
    let cells = (bins as u128).checked_pow(dim as u32).unwrap_or(u128::MAX);
    if cells > cap as u128 {
        return Err(Error::GridTooLarge { cells, cap });
    }
    let cells = cells as usize;
    let shell = HistogramGrid {
        dim,
        bins,
        counts: Vec::new(),
        n: 0,
    };
    const SHARD: usize = 1 << 15;
    let values = copula.values();
    let counts = (0..copula.n_rows().div_ceil(SHARD))
        .into_par_iter()
        .fold(
            || vec![0u64; cells],
            |mut acc, s| {
                let end = ((s + 1) * SHARD).min(copula.n_rows());
                for i in s * SHARD..end {
                    let row = values.row(i);
                    acc[shell.cell_index(row.as_slice().expect("standard layout"))] += 1;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; cells],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(HistogramGrid {
        dim,
        bins,
        counts,
        n: copula.n_rows() as u64,
    })
}
