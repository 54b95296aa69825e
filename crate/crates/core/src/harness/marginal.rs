//! Per-layer marginal fits and nonzero percentages.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{load_layers, ExperimentConfig, LayerData};
use crate::error::{Error, Result};
use crate::marginal::{
    family_seed, fit_sa, kl_fit, zero_split, Family, FamilyFit, FitConfig, FitReport,
};
use crate::stats;
use crate::tensor_io::FeatureSample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonzeroRow {
    pub layer: String,
    pub filters: usize,
    /// Filters without a single nonzero value in one of the splits.
    pub dead: usize,
    pub nonzero_pct_train: f64,
    pub nonzero_pct_test: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonzeroTable {
    pub rows: Vec<NonzeroRow>,
}

impl NonzeroTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer,filters,dead,nonzero_pct_train,nonzero_pct_test\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.4},{:.4}\n",
                r.layer, r.filters, r.dead, r.nonzero_pct_train, r.nonzero_pct_test
            ));
        }
        out
    }
}

fn nonzero_pct(samples: &[FeatureSample]) -> f64 {
    let total: usize = samples.iter().map(|s| s.len()).sum();
    if total == 0 {
        return 0.0;
    }
    let nonzero: usize = samples
        .iter()
        .map(|s| s.values.iter().filter(|&&v| v != 0.0).count())
        .sum();
    100.0 * nonzero as f64 / total as f64
}

fn has_positive(s: &FeatureSample) -> bool {
    s.values.iter().any(|&v| v > 0.0)
}

/// Filters usable for fitting: some positive value in both splits.
fn fittable(layer: &LayerData) -> Vec<usize> {
    (0..layer.filters())
        .filter(|&f| has_positive(&layer.train[f]) && has_positive(&layer.test[f]))
        .collect()
}

pub fn nonzero_row(layer: &LayerData) -> NonzeroRow {
    NonzeroRow {
        layer: layer.name.clone(),
        filters: layer.filters(),
        dead: layer.filters() - fittable(layer).len(),
        nonzero_pct_train: nonzero_pct(&layer.train),
        nonzero_pct_test: nonzero_pct(&layer.test),
    }
}

pub fn nonzero_table(layers: &[LayerData]) -> NonzeroTable {
    NonzeroTable {
        rows: layers.iter().map(nonzero_row).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerFit {
    pub nonzero: NonzeroRow,
    /// Filters that entered the fits.
    pub live: Vec<usize>,
    /// Test KL of every live filter, one column per family in `Family::ALL` order.
    pub per_filter_kl: Vec<[f64; 5]>,
    /// Each round averages the per-filter KL over a random subset of live filters.
    pub report: FitReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalExperimentReport {
    pub layers: Vec<LayerFit>,
    pub nonzero: NonzeroTable,
}

impl MarginalExperimentReport {
    /// `layer,family,mean_kl,lo,hi` rows for KL-per-layer plots.
    pub fn kl_csv(&self) -> String {
        let mut out = String::from("layer,family,mean_kl,lo,hi\n");
        for l in &self.layers {
            for f in &l.report.families {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    l.nonzero.layer, f.family, f.mean_kl, f.interval.0, f.interval.1
                ));
            }
        }
        out
    }
}

/// Fits every live filter of one layer and aggregates over filter subsets.
pub fn marginal_experiment_on(
    layer: &LayerData,
    config: &FitConfig,
    seed: u64,
) -> Result<LayerFit> {
    config.validate()?;
    let nonzero = nonzero_row(layer);
    let live = fittable(layer);
    if live.is_empty() {
        return Err(Error::NotEnoughFeatures { live: 0, needed: 1 });
    }

    let jobs: Vec<(usize, Family)> = live
        .iter()
        .flat_map(|&f| Family::ALL.into_iter().map(move |fam| (f, fam)))
        .collect();
    let kls = jobs
        .par_iter()
        .map(|&(f, family)| {
            let (_, train) = zero_split(&layer.train[f])?;
            let (_, test) = zero_split(&layer.test[f])?;
            let fit = fit_sa(
                family,
                &train.values,
                family_seed(seed, family),
                &config.schedule,
            )?;
            kl_fit(&fit.model, &test.values, config.bins)
        })
        .collect::<Result<Vec<f64>>>()?;
    let per_filter_kl: Vec<[f64; 5]> = kls
        .chunks(Family::ALL.len())
        .map(|c| c.try_into().expect("one value per family"))
        .collect();

    let subset =
        ((live.len() as f64 * config.subset_fraction).round() as usize).clamp(1, live.len());
    let rounds: Vec<Vec<usize>> = (0..config.rounds)
        .map(|r| {
            if subset == live.len() {
                return (0..live.len()).collect();
            }
            let mut rng = stats::rng(stats::derive_seed(seed, r as u64));
            index::sample(&mut rng, live.len(), subset).into_vec()
        })
        .collect();
    let families = Family::ALL
        .iter()
        .enumerate()
        .map(|(fi, &family)| {
            let per_round = rounds
                .iter()
                .map(|picked| {
                    let vals: Vec<f64> = picked.iter().map(|&i| per_filter_kl[i][fi]).collect();
                    stats::mean(&vals)
                })
                .collect();
            FamilyFit::from_rounds(family, per_round, Vec::new())
        })
        .collect();

    let report = FitReport::new(
        families,
        1.0 - nonzero.nonzero_pct_train / 100.0,
        1.0 - nonzero.nonzero_pct_test / 100.0,
    );
    Ok(LayerFit {
        nonzero,
        live,
        per_filter_kl,
        report,
    })
}

pub fn run_marginal_experiment(config: &ExperimentConfig) -> Result<MarginalExperimentReport> {
    let layers = load_layers(config)?;
    experiment_on_layers(&layers, &config.marginal, config.seed)
}

/// Marginal experiment over layers already in memory.
pub fn experiment_on_layers(
    layers: &[LayerData],
    config: &FitConfig,
    seed: u64,
) -> Result<MarginalExperimentReport> {
    let fits = layers
        .iter()
        .enumerate()
        .map(|(i, l)| marginal_experiment_on(l, config, stats::derive_seed(seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(MarginalExperimentReport {
        nonzero: NonzeroTable {
            rows: fits.iter().map(|f| f.nonzero.clone()).collect(),
        },
        layers: fits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_sample, SampleDist};

    fn zi(p_zero: f64, inner: SampleDist) -> SampleDist {
        SampleDist::ZeroInflated {
            p_zero,
            inner: Box::new(inner),
        }
    }

    fn layer(name: &str, dist: &SampleDist, filters: usize, n: usize, seed: u64) -> LayerData {
        let draw = |split: u64| {
            (0..filters)
                .map(|f| {
                    let s =
                        synth_sample(dist, n, stats::derive_seed(seed, split * 1000 + f as u64))
                            .unwrap();
                    FeatureSample::new(f, 0, s.values)
                })
                .collect()
        };
        LayerData::new(name, draw(0), draw(1)).unwrap()
    }

    /// Two mixture-shaped layers followed by positive parts that approach
    /// an exponential.
    fn five_layers() -> Vec<LayerData> {
        let bump = |mean| SampleDist::Gaussian { mean, sd: 0.4 };
        let dists = [
            zi(
                0.2,
                SampleDist::Mixture {
                    weights: vec![1.0, 1.0],
                    components: vec![bump(1.0), bump(3.0)],
                },
            ),
            zi(
                0.4,
                SampleDist::Mixture {
                    weights: vec![1.0, 1.0],
                    components: vec![bump(2.0), SampleDist::Exponential { rate: 1.0 }],
                },
            ),
            zi(
                0.5,
                SampleDist::Gamma {
                    shape: 1.6,
                    scale: 1.0,
                },
            ),
            zi(
                0.55,
                SampleDist::Gamma {
                    shape: 1.25,
                    scale: 1.0,
                },
            ),
            zi(0.6, SampleDist::Exponential { rate: 1.0 }),
        ];
        dists
            .iter()
            .enumerate()
            .map(|(i, d)| layer(&format!("layer{i}"), d, 6, 8000, i as u64))
            .collect()
    }

    #[test]
    fn exponential_fit_improves_with_depth() {
        let config = FitConfig {
            rounds: 10,
            ..FitConfig::default()
        };
        let report = experiment_on_layers(&five_layers(), &config, 1).unwrap();
        let exp: Vec<f64> = report
            .layers
            .iter()
            .map(|l| l.report.family(Family::Exponential).unwrap().mean_kl)
            .collect();
        for w in exp[1..].windows(2) {
            assert!(w[1] < w[0], "exponential KL per layer {exp:?}");
        }
        for row in &report.nonzero.rows {
            assert!((0.0..=100.0).contains(&row.nonzero_pct_train));
            assert!((0.0..=100.0).contains(&row.nonzero_pct_test));
        }
        let csv = report.kl_csv();
        assert_eq!(csv.lines().count(), 1 + 5 * 5);
    }

    #[test]
    fn dead_filters_are_excluded_and_counted() {
        let mut l = layer(
            "l",
            &zi(0.3, SampleDist::Exponential { rate: 1.0 }),
            4,
            2000,
            3,
        );
        l.train[1] = FeatureSample::new(1, 0, vec![0.0; 2000]);
        l.test[1] = FeatureSample::new(1, 0, vec![0.0; 2000]);
        let config = FitConfig {
            rounds: 3,
            ..FitConfig::default()
        };
        let fit = marginal_experiment_on(&l, &config, 0).unwrap();
        assert_eq!(fit.nonzero.dead, 1);
        assert_eq!(fit.live, vec![0, 2, 3]);
        assert_eq!(fit.per_filter_kl.len(), 3);
    }

    #[test]
    fn nonzero_percentages() {
        let all_positive = layer("pos", &SampleDist::Exponential { rate: 1.0 }, 3, 500, 4);
        let row = nonzero_row(&all_positive);
        assert_eq!(row.nonzero_pct_train, 100.0);
        assert_eq!(row.dead, 0);

        let half = LayerData::new(
            "half",
            vec![FeatureSample::new(0, 0, vec![0.0, 1.0, 0.0, 2.0])],
            vec![FeatureSample::new(0, 0, vec![0.0, 0.0, 0.0, 3.0])],
        )
        .unwrap();
        let table = nonzero_table(&[half]);
        assert_eq!(table.rows[0].nonzero_pct_train, 50.0);
        assert_eq!(table.rows[0].nonzero_pct_test, 25.0);
        assert_eq!(
            table.to_csv(),
            "layer,filters,dead,nonzero_pct_train,nonzero_pct_test\nhalf,1,0,50.0000,25.0000\n"
        );
    }

    #[test]
    fn full_subsets_give_zero_width() {
        let l = layer(
            "l",
            &zi(
                0.3,
                SampleDist::Gamma {
                    shape: 2.0,
                    scale: 1.0,
                },
            ),
            3,
            1000,
            5,
        );
        let config = FitConfig {
            rounds: 2,
            subset_fraction: 1.0,
            ..FitConfig::default()
        };
        let fit = marginal_experiment_on(&l, &config, 0).unwrap();
        for f in &fit.report.families {
            assert_eq!(f.interval.0, f.interval.1);
        }
    }

    #[test]
    fn all_dead_layer_is_an_error() {
        let dead = LayerData::new(
            "dead",
            vec![FeatureSample::new(0, 0, vec![0.0; 10])],
            vec![FeatureSample::new(0, 0, vec![0.0; 10])],
        )
        .unwrap();
        assert!(matches!(
            marginal_experiment_on(&dead, &FitConfig::default(), 0),
            Err(Error::NotEnoughFeatures { live: 0, .. })
        ));
    }
}
