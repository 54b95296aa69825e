//! Ground-truth copula datasets with exponential marginals.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::stats;
use crate::tensor_io::{pack_columns, FeatureTensorFile};

/// Top share of column 0 that can trigger a tail event.
pub const TAIL_QUANTILE: f64 = 0.02;
/// Width of the top band the driven columns are pushed into.
pub const TAIL_BAND: f64 = 0.1;
/// Probability that a tail event of column 0 drags a driven column along.
pub const TAIL_PROBABILITY: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CopulaKind {
    Independent,
    /// Equicorrelated normal copula; negative `rho` only for two columns.
    Gaussian {
        rho: f64,
    },
    /// Every column is the same increasing function of one uniform.
    Comonotone,
    /// Independent uniforms except that the top [`TAIL_QUANTILE`] of column 0
    /// pushes each other column into its top [`TAIL_BAND`] with probability
    /// [`TAIL_PROBABILITY`].
    TailDependent,
}

impl CopulaKind {
    fn validate(&self, dim: usize) -> Result<()> {
        if let CopulaKind::Gaussian { rho } = *self {
            let ok = if dim == 2 {
                rho > -1.0 && rho < 1.0
            } else {
                (0.0..1.0).contains(&rho)
            };
            if !ok {
                return Err(Error::InvalidParameter(format!(
                    "gaussian copula with {dim} columns cannot have rho = {rho}"
                )));
            }
        }
        Ok(())
    }

    /// Upper-tail probabilities `1 - u` of one row, written into `out`.
    fn draw_row<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        match *self {
            CopulaKind::Independent => out.iter_mut().for_each(|s| *s = open01(rng)),
            CopulaKind::Comonotone => {
                let s = open01(rng);
                out.iter_mut().for_each(|v| *v = s);
            }
            CopulaKind::Gaussian { rho } => {
                if out.len() == 2 {
                    let a: f64 = rng.sample(StandardNormal);
                    let b: f64 = rng.sample(StandardNormal);
                    out[0] = upper_tail(a);
                    out[1] = upper_tail(rho * a + (1.0 - rho * rho).sqrt() * b);
                } else {
                    let common: f64 = rng.sample(StandardNormal);
                    for v in out.iter_mut() {
                        let own: f64 = rng.sample(StandardNormal);
                        *v = upper_tail(rho.sqrt() * common + (1.0 - rho).sqrt() * own);
                    }
                }
            }
            CopulaKind::TailDependent => {
                // Unforced draws under-weight the top band so that every
                // column stays exactly uniform.
                let forced = TAIL_QUANTILE * TAIL_PROBABILITY;
                let unforced_top = (TAIL_BAND - forced) / (1.0 - forced);
                let s0 = open01(rng);
                out[0] = s0;
                for v in out[1..].iter_mut() {
                    let own = open01(rng);
                    let top = if s0 < TAIL_QUANTILE && rng.random::<f64>() < TAIL_PROBABILITY {
                        true
                    } else {
                        rng.random::<f64>() < unforced_top
                    };
                    *v = if top {
                        own * TAIL_BAND
                    } else {
                        TAIL_BAND + own * (1.0 - TAIL_BAND)
                    };
                }
            }
        }
    }
}

fn open01<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(rand_distr::Open01)
}

/// `P(Z > z)` for a standard normal.
fn upper_tail(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

fn draw(kind: &CopulaKind, dim: usize, n: usize, seed: u64) -> Result<FeatureTensorFile> {
    let mut rng = stats::rng(seed);
    let mut columns = vec![Vec::with_capacity(n); dim];
    let mut row = vec![0.0; dim];
    for _ in 0..n {
        kind.draw_row(&mut rng, &mut row);
        for (col, &s) in columns.iter_mut().zip(&row) {
            col.push(-s.ln());
        }
    }
    pack_columns(&columns)
}

/// Independent train and test draws of `n` rows each, as `[n, dim, 1, 1]`
/// tensors with unit exponential marginals.
pub fn synth_copula_dataset(
    kind: &CopulaKind,
    dim: usize,
    n: usize,
    seed: u64,
) -> Result<(FeatureTensorFile, FeatureTensorFile)> {
    if dim < 2 {
        return Err(Error::UnsupportedDimension(dim));
    }
    if n == 0 {
        return Err(Error::EmptySample);
    }
    kind.validate(dim)?;
    Ok((
        draw(kind, dim, n, stats::derive_seed(seed, 0))?,
        draw(kind, dim, n, stats::derive_seed(seed, 1))?,
    ))
}
