//! Density reconstruction from orthogonal moments, and moment-space
//! distance (GCD) and interdependence (GCI).
//!
//! The reconstructed copula density is the tensor-product series
//! `c(y) = sum_T mu_T prod_d phi_{T_d}(y_d)` over the moment index set.
//! Truncated series can dip below zero, so evaluation clamps at a small
//! positive floor before any logarithm is taken.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::CopulaMatrix;
use crate::error::{Error, Result};
use crate::histogram::HistogramGrid;
use crate::moments::{MomentTensor, MultiIndex};
use crate::stats::CompensatedSum;

pub const DEFAULT_CLAMP_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum DensityKind {
    Gcf(MomentTensor),
    Histogram(HistogramGrid),
}

/// An evaluatable density over `(-1, 1)^D`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    kind: DensityKind,
    floor: f64,
}

impl DensityEstimate {
    pub fn gcf(moments: MomentTensor) -> Result<Self> {
        if !moments.basis().family.is_estimation() {
            return Err(Error::PlotOnlyBasis {
                family: moments.basis().family,
            });
        }
        Ok(Self {
            kind: DensityKind::Gcf(moments),
            floor: DEFAULT_CLAMP_FLOOR,
        })
    }

    pub fn histogram(grid: HistogramGrid) -> Self {
        Self {
            kind: DensityKind::Histogram(grid),
            floor: DEFAULT_CLAMP_FLOOR,
        }
    }

    pub fn with_floor(mut self, floor: f64) -> Result<Self> {
        if !(floor > 0.0 && floor.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "clamp floor must be positive, got {floor}"
            )));
        }
        self.floor = floor;
        Ok(self)
    }

    pub fn kind(&self) -> &DensityKind {
        &self.kind
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            DensityKind::Gcf(m) => m.dim(),
            DensityKind::Histogram(h) => h.dim(),
        }
    }

    fn check_point(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: y.len(),
            });
        }
        match y.iter().find(|v| !(v.abs() < 1.0)) {
            Some(&bad) => Err(Error::OutOfDomain { value: bad }),
            None => Ok(()),
        }
    }

    /// Series (or bin) value before clamping.
    pub fn eval_raw(&self, y: &[f64]) -> Result<f64> {
        self.check_point(y)?;
        Ok(match &self.kind {
            DensityKind::Gcf(m) => SeriesEvaluator::new(m).eval(y),
            DensityKind::Histogram(h) => h.cell_density(h.cell_index(y)),
        })
    }

    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        Ok(self.eval_raw(y)?.max(self.floor))
    }
}

/// Reusable scratch space for evaluating a moment series at many points.
struct SeriesEvaluator<'a> {
    moments: &'a MomentTensor,
    flat: Vec<usize>,
    width: usize,
    table: Vec<f64>,
}

impl<'a> SeriesEvaluator<'a> {
    fn new(moments: &'a MomentTensor) -> Self {
        let width = moments.basis().max_degree + 1;
        Self {
            moments,
            flat: moments
                .indices()
                .iter()
                .flat_map(|m| m.0.iter().copied())
                .collect(),
            width,
            table: vec![0.0; moments.dim() * width],
        }
    }

    fn eval(&mut self, y: &[f64]) -> f64 {
        let dim = self.moments.dim();
        let w = self.width;
        for (d, &v) in y.iter().enumerate() {
            self.moments
                .basis()
                .fill_row(v, &mut self.table[d * w..(d + 1) * w]);
        }
        let mut acc = 0.0;
        for (mu, degrees) in self
            .moments
            .values()
            .iter()
            .zip(self.flat.chunks_exact(dim))
        {
            let mut prod = *mu;
            for (d, &t) in degrees.iter().enumerate() {
                prod *= self.table[d * w + t];
            }
            acc += prod;
        }
        acc
    }
}

pub fn eval_density(est: &DensityEstimate, y: &[f64]) -> Result<f64> {
    est.eval(y)
}

/// Per-index L1 distance between two moment tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcdReport {
    pub value: f64,
    /// `|mu_T - nu_T|` for every non-constant index, in index order.
    pub contributions: Vec<(MultiIndex, f64)>,
}

impl GcdReport {
    /// The `k` largest contributions, ties broken by index order.
    pub fn top(&self, k: usize) -> Vec<(MultiIndex, f64)> {
        let mut sorted = self.contributions.clone();
        sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        sorted.truncate(k);
        sorted
    }
}

/// Manhattan distance between non-constant moments.
pub fn gcd(mu: &MomentTensor, nu: &MomentTensor) -> Result<GcdReport> {
    mu.check_compatible(nu)?;
    let contributions: Vec<(MultiIndex, f64)> = mu
        .iter()
        .zip(nu.values())
        .filter(|((idx, _), _)| !idx.is_constant())
        .map(|((idx, a), b)| (idx.clone(), (a - b).abs()))
        .collect();
    let value = contributions
        .iter()
        .map(|(_, c)| *c)
        .collect::<CompensatedSum>()
        .value();
    Ok(GcdReport {
        value,
        contributions,
    })
}

/// Distance to the independence copula, whose non-constant moments are all
/// zero in the estimation families: the L1 norm of the non-constant moments.
pub fn gci(mu: &MomentTensor) -> Result<f64> {
    gci_report(mu).map(|r| r.value)
}

pub fn gci_report(mu: &MomentTensor) -> Result<GcdReport> {
    if !mu.basis().family.is_estimation() {
        return Err(Error::PlotOnlyBasis {
            family: mu.basis().family,
        });
    }
    let zero = MomentTensor::zeros(*mu.basis(), mu.index_set().clone())?;
    gcd(mu, &zero)
}

fn grid_centers(resolution: usize) -> Vec<f64> {
    (0..resolution)
        .map(|i| -1.0 + (2.0 * i as f64 + 1.0) / resolution as f64)
        .collect()
}

fn grid_with(est: &DensityEstimate, resolution: usize, clamp: bool) -> Result<Array2<f64>> {
    if est.dim() != 2 {
        return Err(Error::UnsupportedDimension(est.dim()));
    }
    if resolution < 2 {
        return Err(Error::InvalidParameter(format!(
            "grid resolution must be >= 2, got {resolution}"
        )));
    }
    let centers = grid_centers(resolution);
    let rows = centers
        .par_iter()
        .map(|&y1| {
            centers
                .iter()
                .map(|&y2| {
                    let v = est.eval_raw(&[y1, y2])?;
                    Ok(if clamp { v.max(est.floor) } else { v })
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Array2::from_shape_fn((resolution, resolution), |(i, j)| {
        rows[i][j]
    }))
}

/// Clamped density at the cell centers of a `resolution x resolution` grid;
/// entry `(i, j)` is at `(y1_i, y2_j)`.
pub fn density_grid(est: &DensityEstimate, resolution: usize) -> Result<Array2<f64>> {
    grid_with(est, resolution, true)
}

/// As [`density_grid`] without the clamp floor.
pub fn density_grid_raw(est: &DensityEstimate, resolution: usize) -> Result<Array2<f64>> {
    grid_with(est, resolution, false)
}

/// Cell-center coordinates used by [`density_grid`].
pub fn grid_coordinates(resolution: usize) -> Vec<f64> {
    grid_centers(resolution)
}

/// Mean negative log density (natural log) of the test rows.
pub fn cross_entropy(est: &DensityEstimate, test: &CopulaMatrix) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::EmptySample);
    }
    if test.dim() != est.dim() {
        return Err(Error::DimensionMismatch {
            expected: est.dim(),
            found: test.dim(),
        });
    }
    const BLOCK: usize = 4096;
    let values = test.values();
    let floor = est.floor;
    let blocks: Vec<CompensatedSum> = (0..test.n_rows().div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let end = ((b + 1) * BLOCK).min(test.n_rows());
            let mut acc = CompensatedSum::new();
            match &est.kind {
                DensityKind::Gcf(m) => {
                    let mut ev = SeriesEvaluator::new(m);
                    for i in b * BLOCK..end {
                        let row = values.row(i);
                        acc.add(
                            -ev.eval(row.as_slice().expect("standard layout"))
                                .max(floor)
                                .ln(),
                        );
                    }
                }
                DensityKind::Histogram(h) => {
                    for i in b * BLOCK..end {
                        let row = values.row(i);
                        let cell = h.cell_index(row.as_slice().expect("standard layout"));
                        acc.add(-h.cell_density(cell).max(floor).ln());
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = CompensatedSum::new();
    for b in &blocks {
        total.merge(b);
    }
    Ok(total.value() / test.n_rows() as f64)
}
