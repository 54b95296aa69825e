//! Held-out cross-entropy of random feature groups under each estimator.

use std::sync::Arc;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{load_layers, ExperimentConfig, LayerData};
use crate::basis::{BasisFamily, BasisSpec};
use crate::copula::{build_copula, fit_cdfs};
use crate::error::{Error, Result};
use crate::gcf::{cross_entropy, DensityEstimate};
use crate::histogram::{default_bins, fit_hist};
use crate::moments::{accumulate, default_max_degree, enumerate_indices};
use crate::stats;

pub const PROTOCOL: &str = "empirical CDFs are fitted on the training split of each group and \
reused to transform the test split; cross-entropy is the mean negative log density of the \
transformed test rows";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Legendre,
    Fourier,
    Histogram,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Legendre, Method::Fourier, Method::Histogram];

    pub fn name(self) -> &'static str {
        match self {
            Method::Legendre => "legendre",
            Method::Fourier => "fourier",
            Method::Histogram => "histogram",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub mean: f64,
    pub sd: f64,
    pub interval: (f64, f64),
    pub per_round: Vec<f64>,
}

impl MethodSummary {
    fn new(method: Method, per_round: Vec<f64>) -> Self {
        let (mean, sd, interval) = stats::one_sigma(&per_round);
        Self {
            method,
            mean,
            sd,
            interval,
            per_round,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    /// `(a, b, disjoint)` for every unordered pair of methods.
    pub pairwise: Vec<(Method, Method, bool)>,
    /// Lowest-mean method whose interval is disjoint from every other one.
    pub best: Option<Method>,
}

fn disjoint(a: (f64, f64), b: (f64, f64)) -> bool {
    a.1 < b.0 || b.1 < a.0
}

/// Significance flags from stored per-method intervals.
pub fn significance(methods: &[MethodSummary]) -> Significance {
    let mut pairwise = Vec::new();
    for (i, a) in methods.iter().enumerate() {
        for b in &methods[i + 1..] {
            pairwise.push((a.method, b.method, disjoint(a.interval, b.interval)));
        }
    }
    let best = methods
        .iter()
        .min_by(|a, b| a.mean.total_cmp(&b.mean))
        .filter(|m| {
            methods
                .iter()
                .all(|o| o.method == m.method || disjoint(m.interval, o.interval))
        })
        .map(|m| m.method);
    Significance { pairwise, best }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub layer: String,
    pub protocol: String,
    pub group_size: usize,
    pub rounds: usize,
    pub max_degree: usize,
    pub bins: usize,
    pub live_features: usize,
    pub methods: Vec<MethodSummary>,
    /// Filters drawn in each round, shared by all methods.
    pub groups: Vec<Vec<usize>>,
    pub significance: Significance,
}

impl ComparisonReport {
    pub fn method(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }

    /// Significance rebuilt from the per-round values alone.
    pub fn recompute_significance(&self) -> Significance {
        let rebuilt: Vec<MethodSummary> = self
            .methods
            .iter()
            .map(|m| MethodSummary::new(m.method, m.per_round.clone()))
            .collect();
        significance(&rebuilt)
    }
}

fn estimator(
    method: Method,
    train: &crate::copula::CopulaMatrix,
    degree: usize,
    bins: usize,
    config: &ExperimentConfig,
    set: &Arc<crate::moments::IndexSet>,
) -> Result<DensityEstimate> {
    let est = match method {
        Method::Legendre | Method::Fourier => {
            let family = if method == Method::Legendre {
                BasisFamily::LegendreNormalized
            } else {
                BasisFamily::FourierReal
            };
            let basis = BasisSpec::new(family, degree)?;
            DensityEstimate::gcf(accumulate(train, &basis, Arc::clone(set))?)?
        }
        Method::Histogram => DensityEstimate::histogram(fit_hist(train, bins)?),
    };
    est.with_floor(config.floor)
}

/// Runs the comparison on one already loaded layer.
pub fn group_experiment_on(
    layer: &LayerData,
    config: &ExperimentConfig,
) -> Result<ComparisonReport> {
    config.validate_settings()?;
    let g = config.group_size;
    let live = layer.live_filters();
    if live.len() < g {
        return Err(Error::NotEnoughFeatures {
            live: live.len(),
            needed: g,
        });
    }
    let degree = config.max_degree.unwrap_or_else(|| default_max_degree(g));
    let bins = config.bins.unwrap_or_else(|| default_bins(g));
    let set = Arc::new(enumerate_indices(g, degree, config.truncation)?);

    let rounds = (0..config.rounds)
        .into_par_iter()
        .map(|r| {
            let seed = config.round_seed(r);
            let mut picked =
                index::sample(&mut stats::rng(stats::derive_seed(seed, 0)), live.len(), g)
                    .into_vec();
            picked.sort_unstable();
            let group: Vec<usize> = picked.into_iter().map(|i| live[i]).collect();
            let train: Vec<_> = group.iter().map(|&f| layer.train[f].clone()).collect();
            let test: Vec<_> = group.iter().map(|&f| layer.test[f].clone()).collect();

            let jitter = stats::derive_seed(seed, 1);
            let cdfs = fit_cdfs(&train, jitter)?;
            let train_copula = build_copula(&cdfs, &train, jitter)?;
            let test_copula = build_copula(&cdfs, &test, stats::derive_seed(seed, 2))?;
            let ces = config
                .methods
                .iter()
                .map(|&m| {
                    cross_entropy(
                        &estimator(m, &train_copula, degree, bins, config, &set)?,
                        &test_copula,
                    )
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((group, ces))
        })
        .collect::<Result<Vec<_>>>()?;

    let methods: Vec<MethodSummary> = config
        .methods
        .iter()
        .enumerate()
        .map(|(i, &m)| MethodSummary::new(m, rounds.iter().map(|(_, ces)| ces[i]).collect()))
        .collect();
    let significance = significance(&methods);
    Ok(ComparisonReport {
        layer: layer.name.clone(),
        protocol: PROTOCOL.to_string(),
        group_size: g,
        rounds: config.rounds,
        max_degree: degree,
        bins,
        live_features: live.len(),
        methods,
        groups: rounds.into_iter().map(|(g, _)| g).collect(),
        significance,
    })
}

/// One report per configured layer.
pub fn run_group_experiment(config: &ExperimentConfig) -> Result<Vec<ComparisonReport>> {
    load_layers(config)?
        .iter()
        .map(|layer| group_experiment_on(layer, config))
        .collect()
}
