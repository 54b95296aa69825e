//! Orthogonal basis functions on `[-1, 1]`.
//!
//! Two families are orthonormal with zero-integral non-constant members and
//! are used for estimation: L2-normalized Legendre polynomials and a real
//! cosine form of the Fourier series. Raw Legendre and Chebyshev polynomials
//! are available for comparison plots only.

use std::f64::consts::{FRAC_PI_2, SQRT_2};
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest supported degree for any family.
pub const MAX_DEGREE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisFamily {
    LegendreNormalized,
    FourierReal,
    LegendreRaw,
    Chebyshev,
}

impl BasisFamily {
    pub const ALL: [BasisFamily; 4] = [
        BasisFamily::LegendreNormalized,
        BasisFamily::FourierReal,
        BasisFamily::LegendreRaw,
        BasisFamily::Chebyshev,
    ];

    /// Whether the family is orthonormal with zero-integral non-constant
    /// members, i.e. usable for moments and density reconstruction.
    pub fn is_estimation(self) -> bool {
        matches!(
            self,
            BasisFamily::LegendreNormalized | BasisFamily::FourierReal
        )
    }

    pub fn code(self) -> u8 {
        match self {
            BasisFamily::LegendreNormalized => 0,
            BasisFamily::FourierReal => 1,
            BasisFamily::LegendreRaw => 2,
            BasisFamily::Chebyshev => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            BasisFamily::LegendreNormalized => "legendre",
            BasisFamily::FourierReal => "fourier",
            BasisFamily::LegendreRaw => "legendre-raw",
            BasisFamily::Chebyshev => "chebyshev",
        }
    }
}

impl fmt::Display for BasisFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BasisFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown basis family {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub family: BasisFamily,
    pub max_degree: usize,
}

impl BasisSpec {
    pub fn new(family: BasisFamily, max_degree: usize) -> Result<Self> {
        if max_degree > MAX_DEGREE {
            return Err(Error::DegreeOutOfRange {
                degree: max_degree,
                max: MAX_DEGREE,
            });
        }
        Ok(Self { family, max_degree })
    }

    pub fn legendre(max_degree: usize) -> Result<Self> {
        Self::new(BasisFamily::LegendreNormalized, max_degree)
    }

    pub fn fourier(max_degree: usize) -> Result<Self> {
        Self::new(BasisFamily::FourierReal, max_degree)
    }

    /// Writes `phi_0(y) ..= phi_K(y)` into `out[..=K]`. `y` is not checked.
    pub(crate) fn fill_row(&self, y: f64, out: &mut [f64]) {
        let k = self.max_degree;
        debug_assert!(out.len() > k);
        match self.family {
            BasisFamily::LegendreRaw | BasisFamily::LegendreNormalized => {
                legendre_sweep(y, &mut out[..=k]);
                if self.family == BasisFamily::LegendreNormalized {
                    for (t, v) in out[..=k].iter_mut().enumerate() {
                        *v *= inv_legendre_norm(t);
                    }
                }
            }
            BasisFamily::FourierReal => {
                out[0] = SQRT_2 / 2.0;
                for (t, v) in out[1..=k].iter_mut().enumerate() {
                    *v = fourier(t + 1, y);
                }
            }
            BasisFamily::Chebyshev => {
                out[0] = 1.0;
                if k >= 1 {
                    out[1] = y;
                }
                for t in 2..=k {
                    out[t] = 2.0 * y * out[t - 1] - out[t - 2];
                }
            }
        }
    }
}

/// Fills `out[t] = P_t(y)` for every `t < out.len()` with Bonnet's recurrence.
fn legendre_sweep(y: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = y;
    }
    for n in 1..out.len().saturating_sub(1) {
        let nf = n as f64;
        out[n + 1] = ((2.0 * nf + 1.0) * y * out[n] - nf * out[n - 1]) / (nf + 1.0);
    }
}

#[inline]
fn fourier(t: usize, y: f64) -> f64 {
    (t as f64 * FRAC_PI_2 * (y - 1.0)).cos()
}

#[inline]
fn inv_legendre_norm(t: usize) -> f64 {
    ((2 * t + 1) as f64 / 2.0).sqrt()
}

/// Unnormalized Legendre polynomial `P_t(y)`.
pub fn legendre_raw(t: usize, y: f64) -> f64 {
    match t {
        0 => 1.0,
        1 => y,
        _ => {
            let (mut prev, mut cur) = (1.0, y);
            for n in 1..t {
                let nf = n as f64;
                let next = ((2.0 * nf + 1.0) * y * cur - nf * prev) / (nf + 1.0);
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// `||P_t||_2` over `(-1, 1)`, i.e. `sqrt(2 / (2t + 1))`.
pub fn legendre_l2_norm(t: usize) -> f64 {
    (2.0 / (2 * t + 1) as f64).sqrt()
}

fn check_domain(y: f64) -> Result<()> {
    if (-1.0..=1.0).contains(&y) {
        Ok(())
    } else {
        Err(Error::OutOfDomain { value: y })
    }
}

pub fn eval_basis(spec: &BasisSpec, t: usize, y: f64) -> Result<f64> {
    if t > spec.max_degree {
        return Err(Error::DegreeOutOfRange {
            degree: t,
            max: spec.max_degree,
        });
    }
    check_domain(y)?;
    Ok(match spec.family {
        BasisFamily::LegendreNormalized => legendre_raw(t, y) / legendre_l2_norm(t),
        BasisFamily::FourierReal if t == 0 => SQRT_2 / 2.0,
        BasisFamily::FourierReal => fourier(t, y),
        BasisFamily::LegendreRaw => legendre_raw(t, y),
        BasisFamily::Chebyshev => (t as f64 * y.acos()).cos(),
    })
}

/// Evaluates degrees `0..=K` at every `y`; row `i` holds sample `ys[i]`.
pub fn basis_table(spec: &BasisSpec, ys: &[f64]) -> Result<Array2<f64>> {
    let width = spec.max_degree + 1;
    let mut table = Array2::zeros((ys.len(), width));
    for (mut row, &y) in table.rows_mut().into_iter().zip(ys) {
        check_domain(y)?;
        let slice = row.as_slice_mut().expect("standard layout");
        spec.fill_row(y, slice);
    }
    Ok(table)
}
