//! Maximum-likelihood fitting by simulated annealing.
//!
//! Parameters are searched in an unconstrained space: positive parameters
//! in log space, locations linearly with a data-derived scale. The chain
//! starts at a moment-matched point and returns the best state it visited.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use super::dist::{Family, ParametricModel};
use crate::error::{Error, Result};
use crate::stats::{self, CompensatedSum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub initial_temperature: f64,
    /// Geometric factor applied after every temperature step.
    pub cooling: f64,
    pub steps: usize,
    pub proposals_per_step: usize,
    /// Proposal standard deviation at the initial temperature; shrinks as
    /// `sqrt(T / T0)`.
    pub step_scale: f64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self {
            initial_temperature: 1.0,
            cooling: 0.95,
            steps: 200,
            proposals_per_step: 20,
            step_scale: 0.5,
        }
    }
}

impl AnnealSchedule {
    fn validate(&self) -> Result<()> {
        if !(self.initial_temperature > 0.0)
            || !(self.cooling > 0.0 && self.cooling < 1.0)
            || self.steps == 0
            || self.proposals_per_step == 0
            || !(self.step_scale > 0.0)
        {
            return Err(Error::InvalidParameter(format!(
                "invalid annealing schedule {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutcome {
    pub model: ParametricModel,
    /// Mean negative log-likelihood at `model`.
    pub objective: f64,
    /// Mean negative log-likelihood at the moment-matched start.
    pub initial_objective: f64,
    pub iterations: usize,
    pub accepted: usize,
    pub n: usize,
}

/// Sufficient statistics of a positive sample.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SampleStats {
    pub n: usize,
    pub mean: f64,
    pub mean_ln: f64,
    /// Population variance.
    pub var: f64,
    pub min: f64,
    pub max: f64,
}

impl SampleStats {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        let mean = stats::mean(values);
        let mean_ln = values
            .iter()
            .map(|v| v.ln())
            .collect::<CompensatedSum>()
            .value()
            / n as f64;
        let var = values
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .collect::<CompensatedSum>()
            .value()
            / n as f64;
        let (min, max) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        Self {
            n,
            mean,
            mean_ln,
            var,
            min,
            max,
        }
    }

    fn degenerate(&self) -> bool {
        self.max <= self.min
    }
}

/// Mean negative log-likelihood of `values` under `model`.
pub(crate) fn mean_nll(model: &ParametricModel, stats: &SampleStats, values: &[f64]) -> f64 {
    match *model {
        ParametricModel::Uniform { low, high } => {
            if stats.min < low || stats.max > high {
                f64::INFINITY
            } else {
                (high - low).ln()
            }
        }
        ParametricModel::Gaussian { mean, sd } => {
            0.5 * (2.0 * std::f64::consts::PI).ln()
                + sd.ln()
                + (stats.var + (stats.mean - mean).powi(2)) / (2.0 * sd * sd)
        }
        ParametricModel::Exponential { rate } => -rate.ln() + rate * stats.mean,
        ParametricModel::Gamma { shape, scale } => {
            ln_gamma(shape) + shape * scale.ln() - (shape - 1.0) * stats.mean_ln
                + stats.mean / scale
        }
        ParametricModel::Weibull { shape, scale } => {
            let power = values
                .iter()
                .map(|v| (v / scale).powf(shape))
                .collect::<CompensatedSum>()
                .value()
                / stats.n as f64;
            -shape.ln() + shape * scale.ln() - (shape - 1.0) * stats.mean_ln + power
        }
    }
}

/// Unconstrained coordinates for one family plus per-coordinate step scale.
struct Parameterization {
    family: Family,
    scales: Vec<f64>,
}

impl Parameterization {
    fn encode(&self, m: &ParametricModel) -> Vec<f64> {
        match *m {
            ParametricModel::Uniform { low, high } => vec![low, (high - low).ln()],
            ParametricModel::Gaussian { mean, sd } => vec![mean, sd.ln()],
            ParametricModel::Exponential { rate } => vec![rate.ln()],
            ParametricModel::Gamma { shape, scale } | ParametricModel::Weibull { shape, scale } => {
                vec![shape.ln(), scale.ln()]
            }
        }
    }

    fn decode(&self, p: &[f64]) -> ParametricModel {
        match self.family {
            Family::Uniform => ParametricModel::Uniform {
                low: p[0],
                high: p[0] + p[1].exp(),
            },
            Family::Gaussian => ParametricModel::Gaussian {
                mean: p[0],
                sd: p[1].exp(),
            },
            Family::Exponential => ParametricModel::Exponential { rate: p[0].exp() },
            Family::Gamma => ParametricModel::Gamma {
                shape: p[0].exp(),
                scale: p[1].exp(),
            },
            Family::Weibull => ParametricModel::Weibull {
                shape: p[0].exp(),
                scale: p[1].exp(),
            },
        }
    }
}

/// Moment-matched starting point and the search parameterization.
fn initialize(family: Family, s: &SampleStats) -> Result<(ParametricModel, Parameterization)> {
    let spread_floor = (s.mean.abs() * 1e-6).max(1e-12);
    let sd = s.var.sqrt().max(spread_floor);
    if s.degenerate() && !matches!(family, Family::Uniform | Family::Gaussian) {
        return Err(Error::DegenerateSample(format!(
            "all {} values equal {}; {family} cannot be fitted",
            s.n, s.min
        )));
    }
    let (model, scales) = match family {
        Family::Uniform => {
            let width = (s.max - s.min).max(spread_floor);
            let low = if s.degenerate() {
                s.min - width / 2.0
            } else {
                s.min
            };
            (
                ParametricModel::Uniform {
                    low,
                    high: low + width,
                },
                vec![width, 1.0],
            )
        }
        Family::Gaussian => (
            ParametricModel::Gaussian { mean: s.mean, sd },
            vec![sd, 1.0],
        ),
        Family::Exponential => (
            ParametricModel::Exponential { rate: 1.0 / s.mean },
            vec![1.0],
        ),
        Family::Gamma => (
            ParametricModel::Gamma {
                shape: s.mean * s.mean / s.var,
                scale: s.var / s.mean,
            },
            vec![1.0, 1.0],
        ),
        Family::Weibull => {
            let cv = sd / s.mean;
            let shape = cv.powf(-1.086).clamp(0.05, 50.0);
            let scale = s.mean / gamma(1.0 + 1.0 / shape);
            (ParametricModel::Weibull { shape, scale }, vec![1.0, 1.0])
        }
    };
    model.validate()?;
    Ok((model, Parameterization { family, scales }))
}

/// Fits `family` to strictly positive values by minimizing the mean negative
/// log-likelihood. Deterministic for a given seed.
pub fn fit_sa(
    family: Family,
    positives: &[f64],
    seed: u64,
    schedule: &AnnealSchedule,
) -> Result<FitOutcome> {
    schedule.validate()?;
    if positives.is_empty() {
        return Err(Error::EmptySample);
    }
    if let Some((i, &v)) = positives
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v > 0.0 && v.is_finite()))
    {
        return Err(Error::InvalidParameter(format!(
            "value {v} at position {i} is not strictly positive"
        )));
    }
    let s = SampleStats::of(positives);
    let (init, param) = initialize(family, &s)?;
    let objective = |m: &ParametricModel| {
        if m.validate().is_err() {
            f64::INFINITY
        } else {
            let v = mean_nll(m, &s, positives);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        }
    };

    let initial_objective = objective(&init);
    let mut current = param.encode(&init);
    let mut current_obj = initial_objective;
    let mut best = init;
    let mut best_obj = initial_objective;
    let mut rng = stats::rng(seed);
    let mut temperature = schedule.initial_temperature;
    let mut iterations = 0;
    let mut accepted = 0;
    let mut proposal = current.clone();

    for _ in 0..schedule.steps {
        let step = schedule.step_scale * (temperature / schedule.initial_temperature).sqrt();
        for _ in 0..schedule.proposals_per_step {
            iterations += 1;
            for ((p, c), scale) in proposal.iter_mut().zip(&current).zip(&param.scales) {
                let z: f64 = rng.sample(StandardNormal);
                *p = c + z * step * scale;
            }
            let candidate = param.decode(&proposal);
            let obj = objective(&candidate);
            let delta = obj - current_obj;
            let accept = delta <= 0.0
                || (obj.is_finite() && rng.random::<f64>() < (-delta / temperature).exp());
            if accept {
                accepted += 1;
                current.copy_from_slice(&proposal);
                current_obj = obj;
                if obj < best_obj {
                    best_obj = obj;
                    best = candidate;
                }
            }
        }
        temperature *= schedule.cooling;
    }

    Ok(FitOutcome {
        model: best,
        objective: best_obj,
        initial_objective,
        iterations,
        accepted,
        n: positives.len(),
    })
}
