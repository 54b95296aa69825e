//! The five parametric families compared on the positive part of a feature.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Uniform,
    Gaussian,
    Exponential,
    Gamma,
    Weibull,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Uniform,
        Family::Gaussian,
        Family::Exponential,
        Family::Gamma,
        Family::Weibull,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Uniform => "uniform",
            Family::Gaussian => "gaussian",
            Family::Exponential => "exponential",
            Family::Gamma => "gamma",
            Family::Weibull => "weibull",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown family {s:?}")))
    }
}

/// A family with concrete parameters. Gamma and Weibull use shape/scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ParametricModel {
    Uniform { low: f64, high: f64 },
    Gaussian { mean: f64, sd: f64 },
    Exponential { rate: f64 },
    Gamma { shape: f64, scale: f64 },
    Weibull { shape: f64, scale: f64 },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

impl ParametricModel {
    pub fn family(&self) -> Family {
        match self {
            ParametricModel::Uniform { .. } => Family::Uniform,
            ParametricModel::Gaussian { .. } => Family::Gaussian,
            ParametricModel::Exponential { .. } => Family::Exponential,
            ParametricModel::Gamma { .. } => Family::Gamma,
            ParametricModel::Weibull { .. } => Family::Weibull,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ParametricModel::Uniform { low, high } => {
                if low.is_finite() && high.is_finite() && high > low {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "uniform needs low < high, got [{low}, {high}]"
                    )))
                }
            }
            ParametricModel::Gaussian { mean, sd } => {
                if !mean.is_finite() {
                    return Err(Error::InvalidParameter(format!("non-finite mean {mean}")));
                }
                positive("sd", sd)
            }
            ParametricModel::Exponential { rate } => positive("rate", rate),
            ParametricModel::Gamma { shape, scale } | ParametricModel::Weibull { shape, scale } => {
                positive("shape", shape)?;
                positive("scale", scale)
            }
        }
    }

    /// Scale parameter for the positive-support families.
    pub fn scale(&self) -> Option<f64> {
        match *self {
            ParametricModel::Exponential { rate } => Some(1.0 / rate),
            ParametricModel::Gamma { scale, .. } | ParametricModel::Weibull { scale, .. } => {
                Some(scale)
            }
            _ => None,
        }
    }

    /// Log density; assumes valid parameters.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        match *self {
            ParametricModel::Uniform { low, high } => {
                if (low..=high).contains(&x) {
                    -(high - low).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            ParametricModel::Gaussian { mean, sd } => {
                let z = (x - mean) / sd;
                -0.5 * z * z - sd.ln() - 0.5 * (2.0 * PI).ln()
            }
            ParametricModel::Exponential { rate } => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    rate.ln() - rate * x
                }
            }
            ParametricModel::Gamma { shape, scale } => {
                if x < 0.0 || (x == 0.0 && shape > 1.0) {
                    f64::NEG_INFINITY
                } else if x == 0.0 && shape == 1.0 {
                    -scale.ln()
                } else {
                    (shape - 1.0) * x.ln() - x / scale - ln_gamma(shape) - shape * scale.ln()
                }
            }
            ParametricModel::Weibull { shape, scale } => {
                if x < 0.0 || (x == 0.0 && shape > 1.0) {
                    f64::NEG_INFINITY
                } else if x == 0.0 && shape == 1.0 {
                    -scale.ln()
                } else {
                    let r = x / scale;
                    shape.ln() - scale.ln() + (shape - 1.0) * r.ln() - r.powf(shape)
                }
            }
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x == f64::INFINITY {
            return 1.0;
        }
        if x == f64::NEG_INFINITY {
            return 0.0;
        }
        match *self {
            ParametricModel::Uniform { low, high } => ((x - low) / (high - low)).clamp(0.0, 1.0),
            ParametricModel::Gaussian { mean, sd } => {
                0.5 * erfc(-(x - mean) / (sd * std::f64::consts::SQRT_2))
            }
            ParametricModel::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            ParametricModel::Gamma { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    gamma_lr(shape, x / scale)
                }
            }
            ParametricModel::Weibull { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-(x / scale).powf(shape)).exp_m1()
                }
            }
        }
    }
}

/// Density of `model` at `x`, validating the parameters first.
pub fn pdf(model: &ParametricModel, x: f64) -> Result<f64> {
    model.validate()?;
    Ok(model.density(x))
}
