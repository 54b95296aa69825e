//! Multivariate orthogonal sample moments of a copula sample.
//!
//! For a multi-index `T` the moment is the row mean of
//! `prod_d phi_{T_d}(y_d)`. Rows are processed in fixed-size blocks with
//! compensated sums and the blocks are reduced in order, so results do not
//! depend on the thread count.

use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{BasisFamily, BasisSpec};
use crate::copula::CopulaMatrix;
use crate::error::{Error, Result};
use crate::stats::CompensatedSum;

/// Default refusal threshold for index-set sizes.
pub const DEFAULT_INDEX_CAP: usize = 1_000_000;

/// Rows per accumulation block.
pub const BLOCK_ROWS: usize = 4096;

const MAGIC: [u8; 4] = *b"FCPM";
const VERSION: u32 = 1;

/// Per-dimension degrees of one joint moment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn degrees(&self) -> &[usize] {
        &self.0
    }

    pub fn is_constant(&self) -> bool {
        self.0.iter().all(|&t| t == 0)
    }

    pub fn total_degree(&self) -> usize {
        self.0.iter().sum()
    }
}

impl std::fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{t}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Truncation {
    /// Every degree in `0..=K` independently: `(K+1)^D` indices.
    TensorProduct,
    /// Degree sum at most `K`.
    TotalDegree,
}

impl Truncation {
    fn code(self) -> u8 {
        match self {
            Truncation::TensorProduct => 0,
            Truncation::TotalDegree => 1,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Truncation::TensorProduct),
            1 => Some(Truncation::TotalDegree),
            _ => None,
        }
    }
}

impl FromStr for Truncation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tensor-product" => Ok(Truncation::TensorProduct),
            "total-degree" => Ok(Truncation::TotalDegree),
            _ => Err(Error::InvalidParameter(format!("unknown truncation {s:?}"))),
        }
    }
}

/// Default max degree for a group of `dim` features.
pub fn default_max_degree(dim: usize) -> usize {
    if dim <= 2 {
        8
    } else {
        4
    }
}

/// Number of indices in a truncation set, without enumerating it.
pub fn index_count(dim: usize, max_degree: usize, truncation: Truncation) -> u128 {
    match truncation {
        Truncation::TensorProduct => (max_degree as u128 + 1)
            .checked_pow(dim as u32)
            .unwrap_or(u128::MAX),
        // C(K + D, D)
        Truncation::TotalDegree => {
            let mut c: u128 = 1;
            for i in 1..=dim as u128 {
                c = match c.checked_mul(max_degree as u128 + i) {
                    Some(v) => v / i,
                    None => return u128::MAX,
                };
            }
            c
        }
    }
}

/// A lexicographically ordered set of multi-indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    dim: usize,
    max_degree: usize,
    truncation: Truncation,
    indices: Vec<MultiIndex>,
}

impl IndexSet {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn position(&self, index: &MultiIndex) -> Option<usize> {
        self.indices.binary_search(index).ok()
    }
}

pub fn enumerate_indices(
    dim: usize,
    max_degree: usize,
    truncation: Truncation,
) -> Result<IndexSet> {
    enumerate_indices_capped(dim, max_degree, truncation, DEFAULT_INDEX_CAP)
}

pub fn enumerate_indices_capped(
    dim: usize,
    max_degree: usize,
    truncation: Truncation,
    cap: usize,
) -> Result<IndexSet> {
    if dim == 0 {
        return Err(Error::UnsupportedDimension(0));
    }
    let count = index_count(dim, max_degree, truncation);
    if count > cap as u128 {
        return Err(Error::TooManyIndices { count, cap });
    }
    let mut indices = Vec::with_capacity(count as usize);
    let mut current = vec![0usize; dim];
    // odometer with the last coordinate fastest gives lexicographic order
    loop {
        let keep = match truncation {
            Truncation::TensorProduct => true,
            Truncation::TotalDegree => current.iter().sum::<usize>() <= max_degree,
        };
        if keep {
            indices.push(MultiIndex(current.clone()));
        }
        let mut d = dim;
        loop {
            if d == 0 {
                return Ok(IndexSet {
                    dim,
                    max_degree,
                    truncation,
                    indices,
                });
            }
            d -= 1;
            if current[d] < max_degree {
                current[d] += 1;
                current[d + 1..].iter_mut().for_each(|v| *v = 0);
                break;
            }
        }
    }
}

/// Sample moments over an index set, with the sample count they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTensor {
    basis: BasisSpec,
    set: Arc<IndexSet>,
    values: Vec<f64>,
    n: u64,
}

impl MomentTensor {
    /// Wraps precomputed moment values. No estimation-family check is made.
    pub fn from_values(
        basis: BasisSpec,
        set: Arc<IndexSet>,
        values: Vec<f64>,
        n: u64,
    ) -> Result<Self> {
        if values.len() != set.len() {
            return Err(Error::LengthMismatch {
                expected: set.len(),
                found: values.len(),
            });
        }
        if set.max_degree > basis.max_degree {
            return Err(Error::DegreeOutOfRange {
                degree: set.max_degree,
                max: basis.max_degree,
            });
        }
        Ok(Self {
            basis,
            set,
            values,
            n,
        })
    }

    /// All-zero tensor with `n = 0`; the identity for [`merge`].
    pub fn zeros(basis: BasisSpec, set: Arc<IndexSet>) -> Result<Self> {
        let len = set.len();
        Self::from_values(basis, set, vec![0.0; len], 0)
    }

    /// Moments of the independence copula: only the constant term is nonzero.
    pub fn independent(basis: BasisSpec, set: Arc<IndexSet>) -> Result<Self> {
        let mut t = Self::zeros(basis, set)?;
        let c = constant_moment(t.dim());
        for (idx, v) in t.set.indices.iter().zip(t.values.iter_mut()) {
            if idx.is_constant() {
                *v = c;
            }
        }
        Ok(t)
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    pub fn index_set(&self) -> &Arc<IndexSet> {
        &self.set
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.set.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.set.dim
    }

    pub fn max_degree(&self) -> usize {
        self.set.max_degree
    }

    pub fn truncation(&self) -> Truncation {
        self.set.truncation
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, index: &MultiIndex) -> Option<f64> {
        self.set.position(index).map(|p| self.values[p])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.set.indices.iter().zip(self.values.iter().copied())
    }

    pub(crate) fn check_compatible(&self, other: &MomentTensor) -> Result<()> {
        if self.basis != other.basis {
            return Err(Error::SpecMismatch(format!(
                "basis {:?} vs {:?}",
                self.basis, other.basis
            )));
        }
        if self.set != other.set {
            return Err(Error::SpecMismatch(format!(
                "index sets differ (D={}, K={}, {:?} vs D={}, K={}, {:?})",
                self.set.dim,
                self.set.max_degree,
                self.set.truncation,
                other.set.dim,
                other.set.max_degree,
                other.set.truncation
            )));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(34 + 8 * self.values.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.basis.family.code());
        out.push(self.set.truncation.code());
        out.extend_from_slice(&(self.set.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.set.max_degree as u32).to_le_bytes());
        out.extend_from_slice(&self.n.to_le_bytes());
        out.extend_from_slice(&(self.values.len() as u64).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        const HEADER: usize = 4 + 4 + 1 + 1 + 4 + 4 + 8 + 8;
        if bytes.len() < HEADER {
            return Err(Error::Truncated {
                expected: HEADER,
                found: bytes.len(),
            });
        }
        let magic: [u8; 4] = bytes[0..4].try_into().expect("4 bytes");
        if magic != MAGIC {
            return Err(Error::BadMagic {
                found: magic,
                expected: MAGIC,
            });
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
        let version = u32_at(4);
        if version != VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                supported: VERSION,
            });
        }
        let family = BasisFamily::from_code(bytes[8])
            .ok_or_else(|| Error::Malformed(format!("unknown basis code {}", bytes[8])))?;
        let truncation = Truncation::from_code(bytes[9])
            .ok_or_else(|| Error::Malformed(format!("unknown truncation code {}", bytes[9])))?;
        let dim = u32_at(10) as usize;
        let max_degree = u32_at(14) as usize;
        let n = u64_at(18);
        let count = u64_at(26) as usize;
        let expected = count
            .checked_mul(8)
            .and_then(|b| b.checked_add(HEADER))
            .ok_or_else(|| Error::Malformed("value count overflows".into()))?;
        if bytes.len() < expected {
            return Err(Error::Truncated {
                expected,
                found: bytes.len(),
            });
        }
        if bytes.len() > expected {
            return Err(Error::TrailingBytes(bytes.len() - expected));
        }
        let set = enumerate_indices_capped(dim, max_degree, truncation, count)?;
        if set.len() != count {
            return Err(Error::Malformed(format!(
                "record holds {count} values but the index set has {}",
                set.len()
            )));
        }
        let values = bytes[HEADER..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Self::from_values(
            BasisSpec::new(family, max_degree)?,
            Arc::new(set),
            values,
            n,
        )
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Constant moment `(sqrt(2)/2)^D` shared by both estimation families.
pub fn constant_moment(dim: usize) -> f64 {
    std::f64::consts::FRAC_1_SQRT_2.powi(dim as i32)
}

/// Running sums for one block of rows.
struct BlockSums {
    sums: Vec<CompensatedSum>,
    n: u64,
}

fn accumulate_block(
    values: ndarray::ArrayView2<'_, f64>,
    basis: &BasisSpec,
    set: &IndexSet,
) -> BlockSums {
    let dim = set.dim;
    let width = basis.max_degree + 1;
    let mut table = vec![0.0; dim * width];
    let mut sums = vec![CompensatedSum::new(); set.len()];
    let flat: Vec<usize> = set
        .indices
        .iter()
        .flat_map(|m| m.0.iter().copied())
        .collect();
    for row in values.rows() {
        for (d, &y) in row.iter().enumerate() {
            basis.fill_row(y, &mut table[d * width..(d + 1) * width]);
        }
        for (sum, degrees) in sums.iter_mut().zip(flat.chunks_exact(dim)) {
            let mut prod = 1.0;
            for (d, &t) in degrees.iter().enumerate() {
                prod *= table[d * width + t];
            }
            sum.add(prod);
        }
    }
    BlockSums {
        sums,
        n: values.nrows() as u64,
    }
}

/// Sample moments of `copula` for every index in `set`.
pub fn accumulate(
    copula: &CopulaMatrix,
    basis: &BasisSpec,
    set: Arc<IndexSet>,
) -> Result<MomentTensor> {
    if !basis.family.is_estimation() {
        return Err(Error::PlotOnlyBasis {
            family: basis.family,
        });
    }
    if set.max_degree > basis.max_degree {
        return Err(Error::DegreeOutOfRange {
            degree: set.max_degree,
            max: basis.max_degree,
        });
    }
    if copula.dim() != set.dim {
        return Err(Error::DimensionMismatch {
            expected: set.dim,
            found: copula.dim(),
        });
    }
    if copula.is_empty() {
        return Err(Error::EmptySample);
    }
    let values = copula.values();
    let blocks: Vec<BlockSums> = (0..copula.n_rows().div_ceil(BLOCK_ROWS))
        .into_par_iter()
        .map(|b| {
            let start = b * BLOCK_ROWS;
            let end = (start + BLOCK_ROWS).min(copula.n_rows());
            accumulate_block(values.slice(ndarray::s![start..end, ..]), basis, &set)
        })
        .collect();
    let mut total = vec![CompensatedSum::new(); set.len()];
    let mut n = 0u64;
    for block in &blocks {
        for (t, s) in total.iter_mut().zip(&block.sums) {
            t.merge(s);
        }
        n += block.n;
    }
    let values = total.iter().map(|s| s.value() / n as f64).collect();
    MomentTensor::from_values(*basis, set, values, n)
}

/// Sample-size weighted combination of two compatible tensors.
pub fn merge(a: &MomentTensor, b: &MomentTensor) -> Result<MomentTensor> {
    a.check_compatible(b)?;
    let n = a.n + b.n;
    let values = if n == 0 {
        vec![0.0; a.len()]
    } else {
        let (wa, wb) = (a.n as f64 / n as f64, b.n as f64 / n as f64);
        a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| wa * x + wb * y)
            .collect()
    };
    MomentTensor::from_values(a.basis, a.set.clone(), values, n)
}
