//! Univariate marginals: point mass at zero plus a parametric positive part.

pub mod anneal;
pub mod dist;
pub mod kl;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use anneal::{fit_sa, AnnealSchedule, FitOutcome};
pub use dist::{pdf, Family, ParametricModel};
pub use kl::{kl_fit, DEFAULT_KL_BINS};

use crate::error::{Error, Result};
use crate::stats;
use crate::tensor_io::FeatureSample;

/// Fraction of exact zeros and the strictly positive values in order.
pub fn zero_split(x: &FeatureSample) -> Result<(f64, FeatureSample)> {
    if x.is_empty() {
        return Err(Error::EmptySample);
    }
    if let Some((position, &value)) = x.values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::NegativeValue { value, position });
    }
    let positives: Vec<f64> = x.values.iter().copied().filter(|&v| v > 0.0).collect();
    let p_zero = (x.len() - positives.len()) as f64 / x.len() as f64;
    Ok((p_zero, FeatureSample::new(x.filter, x.layer, positives)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub rounds: usize,
    pub bins: usize,
    /// Share of the positive values drawn (without replacement) per round.
    /// At 1.0 every round sees the full sample.
    pub subset_fraction: f64,
    pub schedule: AnnealSchedule,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            rounds: 30,
            bins: DEFAULT_KL_BINS,
            subset_fraction: 0.5,
            schedule: AnnealSchedule::default(),
        }
    }
}

impl FitConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.rounds < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 rounds, got {}",
                self.rounds
            )));
        }
        if !(self.subset_fraction > 0.0 && self.subset_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "subset fraction must lie in (0, 1], got {}",
                self.subset_fraction
            )));
        }
        Ok(())
    }
}

/// Per-family goodness of fit across rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyFit {
    pub family: Family,
    pub mean_kl: f64,
    pub sd_kl: f64,
    /// `mean_kl -/+ sd_kl`.
    pub interval: (f64, f64),
    pub per_round: Vec<f64>,
    /// Fitted model of every round, when fits came from a single feature.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub models: Vec<ParametricModel>,
}

impl FamilyFit {
    pub(crate) fn from_rounds(
        family: Family,
        per_round: Vec<f64>,
        models: Vec<ParametricModel>,
    ) -> Self {
        let (mean_kl, sd_kl, interval) = stats::one_sigma(&per_round);
        Self {
            family,
            mean_kl,
            sd_kl,
            interval,
            per_round,
            models,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub families: Vec<FamilyFit>,
    /// Family with the lowest mean test KL.
    pub winner: Family,
    pub p_zero_train: f64,
    pub p_zero_test: f64,
}

impl FitReport {
    pub(crate) fn new(families: Vec<FamilyFit>, p_zero_train: f64, p_zero_test: f64) -> Self {
        let winner = families
            .iter()
            .min_by(|a, b| a.mean_kl.total_cmp(&b.mean_kl))
            .map(|f| f.family)
            .expect("at least one family");
        Self {
            families,
            winner,
            p_zero_train,
            p_zero_test,
        }
    }

    pub fn family(&self, family: Family) -> Option<&FamilyFit> {
        self.families.iter().find(|f| f.family == family)
    }
}

/// Draws `fraction` of `values` without replacement, keeping original order.
pub(crate) fn subsample(values: &[f64], fraction: f64, seed: u64) -> Vec<f64> {
    if fraction >= 1.0 {
        return values.to_vec();
    }
    let m = ((values.len() as f64 * fraction).round() as usize).clamp(1, values.len());
    let mut picked = index::sample(&mut stats::rng(seed), values.len(), m).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| values[i]).collect()
}

/// Seed for the annealing chain of one family; shared across rounds so
/// that identical round data yields identical fits.
pub(crate) fn family_seed(seed: u64, family: Family) -> u64 {
    stats::derive_seed(seed, 0xFA00 + family as u64)
}

/// Fits every family on train positives and scores it on test positives,
/// repeated over `config.rounds` random subsets.
pub fn fit_report(
    train: &FeatureSample,
    test: &FeatureSample,
    config: &FitConfig,
    seed: u64,
) -> Result<FitReport> {
    config.validate()?;
    let (p_zero_train, train_pos) = zero_split(train)?;
    let (p_zero_test, test_pos) = zero_split(test)?;
    if train_pos.is_empty() || test_pos.is_empty() {
        return Err(Error::DeadFeature);
    }

    let rounds: Vec<(Vec<f64>, Vec<f64>)> = (0..config.rounds)
        .map(|r| {
            let rs = stats::derive_seed(seed, r as u64);
            (
                subsample(
                    &train_pos.values,
                    config.subset_fraction,
                    stats::derive_seed(rs, 0),
                ),
                subsample(
                    &test_pos.values,
                    config.subset_fraction,
                    stats::derive_seed(rs, 1),
                ),
            )
        })
        .collect();

    let jobs: Vec<(usize, Family)> = (0..config.rounds)
        .flat_map(|r| Family::ALL.into_iter().map(move |f| (r, f)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(r, family)| {
            let (tr, te) = &rounds[r];
            let fit = fit_sa(family, tr, family_seed(seed, family), &config.schedule)?;
            Ok((fit.model, kl_fit(&fit.model, te, config.bins)?))
        })
        .collect::<Result<Vec<_>>>()?;

    let families = Family::ALL
        .iter()
        .enumerate()
        .map(|(fi, &family)| {
            let (models, kls): (Vec<_>, Vec<_>) = (0..config.rounds)
                .map(|r| results[r * Family::ALL.len() + fi])
                .unzip();
            FamilyFit::from_rounds(family, kls, models)
        })
        .collect();
    Ok(FitReport::new(families, p_zero_train, p_zero_test))
}
