//! Discrete KL divergence of a model from held-out data over
//! equal-probability bins of the data.

use super::dist::ParametricModel;
use crate::error::{Error, Result};

pub const DEFAULT_KL_BINS: usize = 50;

/// Lower bound on the model mass of any bin.
pub const MASS_FLOOR: f64 = 1e-12;

/// Inner bin edges splitting sorted data into `bins` near-equal counts.
/// Edges sit halfway between neighbouring order statistics; ties can
/// produce repeated edges (and therefore empty bins).
pub fn equal_probability_edges(sorted: &[f64], bins: usize) -> Vec<f64> {
    let n = sorted.len();
    (1..bins)
        .map(|b| {
            let idx = ((b * n) as f64 / bins as f64).round() as usize;
            match idx {
                0 => sorted[0],
                i if i >= n => sorted[n - 1],
                i => 0.5 * (sorted[i - 1] + sorted[i]),
            }
        })
        .collect()
}

/// Empirical bin proportions of `sorted` for the given inner edges; bin `b`
/// is `(e_{b-1}, e_b]`.
pub fn bin_proportions(sorted: &[f64], edges: &[f64]) -> Vec<f64> {
    let mut counts = vec![0usize; edges.len() + 1];
    for &v in sorted {
        counts[edges.partition_point(|&e| e < v)] += 1;
    }
    counts
        .iter()
        .map(|&c| c as f64 / sorted.len() as f64)
        .collect()
}

/// `sum_b p_b ln(p_b / max(q_b, MASS_FLOOR))` over bins with `p_b > 0`.
pub fn discrete_kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pb, _)| **pb > 0.0)
        .map(|(pb, qb)| pb * (pb / qb.max(MASS_FLOOR)).ln())
        .sum::<f64>()
        .max(0.0)
}

/// KL(empirical test distribution || model) over `bins` equal-probability
/// bins spanning the observed test range.
pub fn kl_fit(model: &ParametricModel, test_positives: &[f64], bins: usize) -> Result<f64> {
    model.validate()?;
    if test_positives.is_empty() {
        return Err(Error::EmptySample);
    }
    if bins < 10 {
        return Err(Error::InvalidParameter(format!(
            "need at least 10 bins, got {bins}"
        )));
    }
    let mut sorted = test_positives.to_vec();
    sorted.sort_by(f64::total_cmp);
    let edges = equal_probability_edges(&sorted, bins);
    let p = bin_proportions(&sorted, &edges);
    let mut bounds = Vec::with_capacity(bins + 1);
    bounds.push(sorted[0]);
    bounds.extend_from_slice(&edges);
    bounds.push(sorted[sorted.len() - 1]);
    let q: Vec<f64> = bounds
        .windows(2)
        .map(|w| (model.cdf(w[1]) - model.cdf(w[0])).max(0.0))
        .collect();
    let support_mass: f64 = p
        .iter()
        .zip(&q)
        .filter(|(pb, _)| **pb > 0.0)
        .map(|(_, qb)| qb)
        .sum();
    if support_mass <= 0.0 {
        return Err(Error::ZeroModelMass);
    }
    Ok(discrete_kl(&p, &q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marginal::anneal::{fit_sa, AnnealSchedule};
    use crate::marginal::dist::Family;
    use crate::synth::{synth_sample, SampleDist};

    #[test]
    fn identical_distributions_have_zero_kl() {
        let x = synth_sample(&SampleDist::Exponential { rate: 1.0 }, 1000, 1)
            .unwrap()
            .values;
        let mut sorted = x.clone();
        sorted.sort_by(f64::total_cmp);
        let edges = equal_probability_edges(&sorted, 20);
        let p = bin_proportions(&sorted, &edges);
        assert!(p.iter().all(|&v| (v - 0.05).abs() < 1e-12));
        assert_eq!(discrete_kl(&p, &p), 0.0);
    }

    #[test]
    fn fitted_exponential_is_close_and_uniform_is_far() {
        let train = synth_sample(&SampleDist::Exponential { rate: 1.0 }, 100_000, 2)
            .unwrap()
            .values;
        let test = synth_sample(&SampleDist::Exponential { rate: 1.0 }, 100_000, 3)
            .unwrap()
            .values;
        let schedule = AnnealSchedule::default();
        let exp = fit_sa(Family::Exponential, &train, 0, &schedule)
            .unwrap()
            .model;
        let uni = fit_sa(Family::Uniform, &train, 0, &schedule).unwrap().model;
        let kl_exp = kl_fit(&exp, &test, 50).unwrap();
        let kl_uni = kl_fit(&uni, &test, 50).unwrap();
        assert!(kl_exp <= 0.01, "exponential KL {kl_exp}");
        assert!(
            kl_uni >= 10.0 * kl_exp,
            "uniform {kl_uni} vs exponential {kl_exp}"
        );

        // continuous KL(Exp(1) || U[0, max]) = ln(max) - 1 for the mass inside
        // the range; binning can only lower it (data-processing inequality)
        let ParametricModel::Uniform { high, .. } = uni else {
            panic!()
        };
        assert!(
            kl_uni <= high.ln() - 1.0 + 0.05,
            "{kl_uni} vs {}",
            high.ln() - 1.0
        );
        assert!(kl_uni > 0.5 * (high.ln() - 1.0));
    }

    #[test]
    fn errors() {
        let m = ParametricModel::Exponential { rate: 1.0 };
        assert!(matches!(kl_fit(&m, &[], 50), Err(Error::EmptySample)));
        assert!(matches!(
            kl_fit(&m, &[1.0], 5),
            Err(Error::InvalidParameter(_))
        ));
        let u = ParametricModel::Uniform {
            low: 100.0,
            high: 101.0,
        };
        let data: Vec<f64> = (1..=100).map(|i| i as f64 / 100.0).collect();
        assert!(matches!(kl_fit(&u, &data, 10), Err(Error::ZeroModelMass)));
    }
}
