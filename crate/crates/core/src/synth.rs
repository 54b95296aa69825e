//! Seeded synthetic feature samples.

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, Normal, Weibull};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;
use crate::tensor_io::FeatureSample;

/// Distribution descriptor for [`synth_sample`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SampleDist {
    Uniform {
        low: f64,
        high: f64,
    },
    /// Normal restricted to `[0, inf)` by rejection.
    Gaussian {
        mean: f64,
        sd: f64,
    },
    Exponential {
        rate: f64,
    },
    Gamma {
        shape: f64,
        scale: f64,
    },
    Weibull {
        shape: f64,
        scale: f64,
    },
    /// Exact zeros with probability `p_zero`, otherwise a draw from `inner`.
    ZeroInflated {
        p_zero: f64,
        inner: Box<SampleDist>,
    },
    /// Component `i` drawn with probability proportional to `weights[i]`.
    Mixture {
        weights: Vec<f64>,
        components: Vec<SampleDist>,
    },
}

enum Sampler {
    Uniform(f64, f64),
    Gaussian(Normal<f64>),
    Exponential(Exp<f64>),
    Gamma(Gamma<f64>),
    Weibull(Weibull<f64>),
    ZeroInflated(f64, Box<Sampler>),
    Mixture(Vec<f64>, Vec<Sampler>),
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

impl SampleDist {
    fn sampler(&self) -> Result<Sampler> {
        Ok(match *self {
            SampleDist::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite() && low >= 0.0 && high > low) {
                    return Err(Error::InvalidParameter(format!(
                        "uniform needs 0 <= low < high, got [{low}, {high}]"
                    )));
                }
                Sampler::Uniform(low, high)
            }
            SampleDist::Gaussian { mean, sd } => {
                positive("sd", sd)?;
                if !mean.is_finite() || mean < -6.0 * sd {
                    return Err(Error::InvalidParameter(format!(
                        "gaussian mean {mean} leaves no usable mass above zero"
                    )));
                }
                Sampler::Gaussian(Normal::new(mean, sd).expect("validated"))
            }
            SampleDist::Exponential { rate } => {
                Sampler::Exponential(Exp::new(positive("rate", rate)?).expect("validated"))
            }
            SampleDist::Gamma { shape, scale } => Sampler::Gamma(
                Gamma::new(positive("shape", shape)?, positive("scale", scale)?)
                    .expect("validated"),
            ),
            SampleDist::Weibull { shape, scale } => Sampler::Weibull(
                Weibull::new(positive("scale", scale)?, positive("shape", shape)?)
                    .expect("validated"),
            ),
            SampleDist::ZeroInflated { p_zero, ref inner } => {
                if !(0.0..=1.0).contains(&p_zero) {
                    return Err(Error::InvalidParameter(format!(
                        "p_zero must lie in [0, 1], got {p_zero}"
                    )));
                }
                Sampler::ZeroInflated(p_zero, Box::new(inner.sampler()?))
            }
            SampleDist::Mixture {
                ref weights,
                ref components,
            } => {
                if weights.is_empty()
                    || weights.len() != components.len()
                    || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
                {
                    return Err(Error::InvalidParameter(
                        "mixture needs one non-negative weight per component".into(),
                    ));
                }
                let total: f64 = weights.iter().sum();
                if total <= 0.0 {
                    return Err(Error::InvalidParameter(
                        "mixture weights sum to zero".into(),
                    ));
                }
                let mut acc = 0.0;
                let cumulative = weights
                    .iter()
                    .map(|w| {
                        acc += w / total;
                        acc
                    })
                    .collect();
                let samplers = components
                    .iter()
                    .map(|c| c.sampler())
                    .collect::<Result<_>>()?;
                Sampler::Mixture(cumulative, samplers)
            }
        })
    }
}

impl Sampler {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Uniform(a, b) => a + (b - a) * rng.random::<f64>(),
            Sampler::Gaussian(normal) => loop {
                let v = normal.sample(rng);
                if v >= 0.0 {
                    break v;
                }
            },
            Sampler::Exponential(d) => d.sample(rng),
            Sampler::Gamma(d) => d.sample(rng),
            Sampler::Weibull(d) => d.sample(rng),
            Sampler::ZeroInflated(p, inner) => {
                if rng.random::<f64>() < *p {
                    0.0
                } else {
                    inner.draw(rng)
                }
            }
            Sampler::Mixture(cumulative, samplers) => {
                let u = rng.random::<f64>();
                let i = cumulative
                    .partition_point(|&c| c <= u)
                    .min(samplers.len() - 1);
                samplers[i].draw(rng)
            }
        }
    }
}

/// Draws `n` values from `dist`; bit-identical for equal seeds.
pub fn synth_sample(dist: &SampleDist, n: usize, seed: u64) -> Result<FeatureSample> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let sampler = dist.sampler()?;
    let mut rng = stats::rng(seed);
    let values = (0..n).map(|_| sampler.draw(&mut rng)).collect();
    Ok(FeatureSample::from_values(values))
}
