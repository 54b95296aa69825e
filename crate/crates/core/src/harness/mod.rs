//! End-to-end experiments over layer dumps.
//!
//! A layer is a pair of rank-4 tensors `[images, filters, rows, cols]`, one
//! for the training split and one for the test split. Every filter is a
//! feature; its sample collects all images and spatial positions.

pub mod group;
pub mod marginal;
pub mod synth;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginal::FitConfig;
use crate::moments::Truncation;
use crate::tensor_io::{flatten_all, read_tensor, FeatureSample};

pub use group::{
    group_experiment_on, run_group_experiment, ComparisonReport, Method, MethodSummary,
    Significance,
};
pub use marginal::{
    marginal_experiment_on, nonzero_row, nonzero_table, run_marginal_experiment, LayerFit,
    MarginalExperimentReport, NonzeroRow, NonzeroTable,
};
pub use synth::{synth_copula_dataset, CopulaKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerFiles {
    pub name: String,
    pub train: PathBuf,
    pub test: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub layers: Vec<LayerFiles>,
    pub group_size: usize,
    pub rounds: usize,
    pub methods: Vec<Method>,
    /// Per-dimension degree; the dimension default when absent.
    pub max_degree: Option<usize>,
    pub truncation: Truncation,
    /// Histogram bins per dimension; the dimension default when absent.
    pub bins: Option<usize>,
    pub seed: u64,
    /// Explicit per-round seeds overriding the ones derived from `seed`.
    pub round_seeds: Option<Vec<u64>>,
    /// Density floor applied before taking logs.
    pub floor: f64,
    pub marginal: FitConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            layers: Vec::new(),
            group_size: 4,
            rounds: 30,
            methods: Method::ALL.to_vec(),
            max_degree: None,
            truncation: Truncation::TensorProduct,
            bins: None,
            seed: 0,
            round_seeds: None,
            floor: crate::gcf::DEFAULT_CLAMP_FLOOR,
            marginal: FitConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Checks the settings and that every referenced file exists.
    pub fn validate(&self) -> Result<()> {
        self.validate_settings()?;
        for layer in &self.layers {
            for path in [&layer.train, &layer.test] {
                if !path.is_file() {
                    return Err(Error::io(
                        path,
                        std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn validate_settings(&self) -> Result<()> {
        if self.group_size < 2 {
            return Err(Error::InvalidParameter(format!(
                "group size must be at least 2, got {}",
                self.group_size
            )));
        }
        if self.rounds < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 rounds, got {}",
                self.rounds
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter("no methods to compare".into()));
        }
        if let Some(seeds) = &self.round_seeds {
            if seeds.len() != self.rounds {
                return Err(Error::LengthMismatch {
                    expected: self.rounds,
                    found: seeds.len(),
                });
            }
        }
        if !(self.floor > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "floor must be positive, got {}",
                self.floor
            )));
        }
        self.marginal.validate()
    }

    pub(crate) fn round_seed(&self, round: usize) -> u64 {
        match &self.round_seeds {
            Some(seeds) => seeds[round],
            None => crate::stats::derive_seed(self.seed, round as u64),
        }
    }
}

/// Per-filter samples of both splits of one layer.
#[derive(Debug, Clone)]
pub struct LayerData {
    pub name: String,
    pub train: Vec<FeatureSample>,
    pub test: Vec<FeatureSample>,
}

impl LayerData {
    pub fn new(
        name: impl Into<String>,
        train: Vec<FeatureSample>,
        test: Vec<FeatureSample>,
    ) -> Result<Self> {
        if train.len() != test.len() {
            return Err(Error::LengthMismatch {
                expected: train.len(),
                found: test.len(),
            });
        }
        Ok(Self {
            name: name.into(),
            train,
            test,
        })
    }

    pub fn load(files: &LayerFiles, layer: usize) -> Result<Self> {
        Self::new(
            files.name.clone(),
            flatten_all(&read_tensor(&files.train)?, layer)?,
            flatten_all(&read_tensor(&files.test)?, layer)?,
        )
    }

    pub fn filters(&self) -> usize {
        self.train.len()
    }

    /// Filters with at least one nonzero training value.
    pub fn live_filters(&self) -> Vec<usize> {
        (0..self.filters())
            .filter(|&f| self.train[f].values.iter().any(|&v| v != 0.0))
            .collect()
    }
}

pub(crate) fn load_layers(config: &ExperimentConfig) -> Result<Vec<LayerData>> {
    config.validate()?;
    if config.layers.is_empty() {
        return Err(Error::InvalidParameter("no layers configured".into()));
    }
    config
        .layers
        .iter()
        .enumerate()
        .map(|(i, files)| LayerData::load(files, i))
        .collect()
}
