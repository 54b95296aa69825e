use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use copula_mom::basis::{basis_table, BasisFamily, BasisSpec};
use copula_mom::copula::{build_copula, fit_cdfs, CopulaMatrix};
use copula_mom::gcf::{self, density_grid, grid_coordinates, DensityEstimate};
use copula_mom::harness::{
    marginal::{experiment_on_layers, nonzero_table},
    run_group_experiment, synth_copula_dataset, ComparisonReport, CopulaKind, ExperimentConfig,
    LayerData, LayerFiles, MarginalExperimentReport,
};
use copula_mom::histogram::fit_hist;
use copula_mom::moments::{
    accumulate, default_max_degree, enumerate_indices, MomentTensor, Truncation,
};
use copula_mom::tensor_io::{flatten_filter, read_tensor, write_tensor};

#[derive(Parser)]
#[command(
    name = "copula-mom",
    version,
    about = "Copula density estimation by orthogonal moments"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Base seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory; stdout when omitted for text output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Experiment configuration as JSON; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Independent,
    Gaussian,
    Comonotone,
    TailDependent,
}

#[derive(Subcommand)]
enum Command {
    /// Print the header and value summary of a tensor file.
    Inspect { file: PathBuf },
    /// Tabulate basis functions on a uniform grid over [-1, 1].
    BasisPlot {
        #[arg(long, default_value = "legendre")]
        family: BasisFamily,
        #[arg(long, default_value_t = 8)]
        max_degree: usize,
        #[arg(long, default_value_t = 512)]
        points: usize,
    },
    /// Write a synthetic train/test pair into the `--out` directory.
    Synth {
        #[arg(long, value_enum, default_value = "independent")]
        kind: Kind,
        #[arg(long, default_value_t = 0.5)]
        rho: f64,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
    },
    /// Copula-transform selected filters; test data reuse the train CDFs.
    Copula {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', required = true)]
        filters: Vec<usize>,
        /// Where the transformed test rows go.
        #[arg(long, requires = "test")]
        test_out: Option<PathBuf>,
    },
    /// Accumulate the moment tensor of a copula file.
    Moments {
        copula: PathBuf,
        #[arg(long, default_value = "legendre")]
        family: BasisFamily,
        #[arg(long)]
        max_degree: Option<usize>,
        #[arg(long, default_value = "tensor-product")]
        truncation: Truncation,
    },
    /// Interdependence of a moment file.
    Gci {
        moments: PathBuf,
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Distance between two moment files.
    Gcd {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Pairwise density of two filters under every estimator.
    DensityGrid {
        input: PathBuf,
        /// Two filter indices, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        filters: Vec<usize>,
        #[arg(long, default_value_t = 8)]
        max_degree: usize,
        #[arg(long, default_value_t = 16)]
        bins: usize,
        #[arg(long, default_value_t = 16)]
        resolution: usize,
    },
    /// Marginal fits of every layer, given as `[name=]train:test`.
    Marginals {
        layers: Vec<String>,
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Percentage of nonzero activations per layer.
    NonzeroTable { layers: Vec<String> },
    /// Held-out cross-entropy of random feature groups.
    GroupExperiment {
        layers: Vec<String>,
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        group_size: Option<usize>,
    },
    /// Marginal fits driven by a configuration file.
    MarginalExperiment { layers: Vec<String> },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let c = &cli.common;
    let seed = c.seed.unwrap_or(0);
    match cli.command {
        Command::Inspect { file } => {
            let t = read_tensor(&file)?;
            let data = t.data();
            let nonzero = data.iter().filter(|&&v| v != 0.0).count();
            let (min, max) = data
                .iter()
                .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
            let summary = json!({
                "file": file,
                "version": t.version(),
                "dtype": "f32",
                "dims": t.dims(),
                "values": t.len(),
                "nonzero_pct": if t.is_empty() { 0.0 } else { 100.0 * nonzero as f64 / t.len() as f64 },
                "min": min,
                "max": max,
            });
            emit_json(c, &summary)
        }
        Command::BasisPlot {
            family,
            max_degree,
            points,
        } => {
            if points < 2 {
                bail!("need at least 2 points");
            }
            let spec = BasisSpec::new(family, max_degree)?;
            let ys: Vec<f64> = (0..points)
                .map(|i| -1.0 + 2.0 * i as f64 / (points - 1) as f64)
                .collect();
            let table = basis_table(&spec, &ys)?;
            match format(c, Format::Csv) {
                Format::Csv => {
                    let mut out = String::from("y,t,phi\n");
                    for t in 0..=max_degree {
                        for (i, y) in ys.iter().enumerate() {
                            writeln!(out, "{y},{t},{}", table[[i, t]])?;
                        }
                    }
                    emit(c, &out)
                }
                Format::Json => {
                    let rows: Vec<Vec<f64>> =
                        (0..=max_degree).map(|t| table.column(t).to_vec()).collect();
                    emit_json(c, &json!({ "family": family.name(), "y": ys, "phi": rows }))
                }
            }
        }
        Command::Synth { kind, rho, dim, n } => {
            let kind = match kind {
                Kind::Independent => CopulaKind::Independent,
                Kind::Gaussian => CopulaKind::Gaussian { rho },
                Kind::Comonotone => CopulaKind::Comonotone,
                Kind::TailDependent => CopulaKind::TailDependent,
            };
            let dir = required_out(c)?;
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let (train, test) = synth_copula_dataset(&kind, dim, n, seed)?;
            write_tensor(dir.join("train.bin"), &train)?;
            write_tensor(dir.join("test.bin"), &test)?;
            Ok(())
        }
        Command::Copula {
            train,
            test,
            filters,
            test_out,
        } => {
            let out = required_out(c)?;
            let train_t = read_tensor(&train)?;
            let samples = filters
                .iter()
                .map(|&f| flatten_filter(&train_t, f, 0))
                .collect::<copula_mom::Result<Vec<_>>>()?;
            let cdfs = fit_cdfs(&samples, seed)?;
            write_tensor(out, &build_copula(&cdfs, &samples, seed)?.to_tensor()?)?;
            if let (Some(test), Some(test_out)) = (test, test_out) {
                let test_t = read_tensor(&test)?;
                let samples = filters
                    .iter()
                    .map(|&f| flatten_filter(&test_t, f, 0))
                    .collect::<copula_mom::Result<Vec<_>>>()?;
                let copula = build_copula(&cdfs, &samples, seed ^ 1)?;
                write_tensor(test_out, &copula.to_tensor()?)?;
            }
            Ok(())
        }
        Command::Moments {
            copula,
            family,
            max_degree,
            truncation,
        } => {
            let out = required_out(c)?;
            let copula = CopulaMatrix::from_tensor(&read_tensor(&copula)?)?;
            let k = max_degree.unwrap_or_else(|| default_max_degree(copula.dim()));
            let set = Arc::new(enumerate_indices(copula.dim(), k, truncation)?);
            accumulate(&copula, &BasisSpec::new(family, k)?, set)?.write(out)?;
            Ok(())
        }
        Command::Gci { moments, top } => {
            let report = gcf::gci_report(&MomentTensor::read(&moments)?)?;
            emit_distance(c, "gci", report.value, &report.top(top))
        }
        Command::Gcd { a, b, top } => {
            let report = gcf::gcd(&MomentTensor::read(&a)?, &MomentTensor::read(&b)?)?;
            emit_distance(c, "gcd", report.value, &report.top(top))
        }
        Command::DensityGrid {
            input,
            filters,
            max_degree,
            bins,
            resolution,
        } => {
            if filters.len() != 2 {
                bail!(
                    "density-grid needs exactly two filters, got {}",
                    filters.len()
                );
            }
            let t = read_tensor(&input)?;
            let samples = filters
                .iter()
                .map(|&f| flatten_filter(&t, f, 0))
                .collect::<copula_mom::Result<Vec<_>>>()?;
            let copula = build_copula(&fit_cdfs(&samples, seed)?, &samples, seed)?;
            let set = Arc::new(enumerate_indices(2, max_degree, Truncation::TensorProduct)?);
            let grid = |est: DensityEstimate| density_grid(&est, resolution);
            let legendre = grid(DensityEstimate::gcf(accumulate(
                &copula,
                &BasisSpec::legendre(max_degree)?,
                Arc::clone(&set),
            )?)?)?;
            let fourier = grid(DensityEstimate::gcf(accumulate(
                &copula,
                &BasisSpec::fourier(max_degree)?,
                set,
            )?)?)?;
            let hist = grid(DensityEstimate::histogram(fit_hist(&copula, bins)?))?;
            let ys = grid_coordinates(resolution);
            match format(c, Format::Csv) {
                Format::Csv => {
                    let mut out = String::from("y1,y2,legendre,fourier,histogram\n");
                    for (i, y1) in ys.iter().enumerate() {
                        for (j, y2) in ys.iter().enumerate() {
                            writeln!(
                                out,
                                "{y1},{y2},{},{},{}",
                                legendre[[i, j]],
                                fourier[[i, j]],
                                hist[[i, j]]
                            )?;
                        }
                    }
                    emit(c, &out)
                }
                Format::Json => {
                    let rows = |a: &ndarray::Array2<f64>| -> Vec<Vec<f64>> {
                        a.rows().into_iter().map(|r| r.to_vec()).collect()
                    };
                    emit_json(
                        c,
                        &json!({
                            "y": ys,
                            "legendre": rows(&legendre),
                            "fourier": rows(&fourier),
                            "histogram": rows(&hist),
                        }),
                    )
                }
            }
        }
        Command::Marginals {
            layers,
            rounds,
            bins,
        } => {
            let mut config = experiment_config(c, &layers)?;
            if let Some(r) = rounds {
                config.marginal.rounds = r;
            }
            if let Some(b) = bins {
                config.marginal.bins = b;
            }
            emit_marginals(c, &marginal_report(&config)?)
        }
        Command::MarginalExperiment { layers } => {
            let config = experiment_config(c, &layers)?;
            emit_marginals(c, &marginal_report(&config)?)
        }
        Command::NonzeroTable { layers } => {
            let config = experiment_config(c, &layers)?;
            let loaded = load(&config)?;
            let table = nonzero_table(&loaded);
            match format(c, Format::Csv) {
                Format::Csv => emit(c, &table.to_csv()),
                Format::Json => emit_json(c, &table),
            }
        }
        Command::GroupExperiment {
            layers,
            rounds,
            group_size,
        } => {
            let mut config = experiment_config(c, &layers)?;
            if let Some(r) = rounds {
                config.rounds = r;
            }
            if let Some(g) = group_size {
                config.group_size = g;
            }
            let reports = run_group_experiment(&config)?;
            match format(c, Format::Json) {
                Format::Json => emit_json(c, &reports),
                Format::Csv => emit(c, &comparison_csv(&reports)),
            }
        }
    }
}

fn format(c: &Common, default: Format) -> Format {
    c.format.unwrap_or(default)
}

fn required_out(c: &Common) -> Result<&Path> {
    c.out
        .as_deref()
        .context("--out is required for this command")
}

fn emit(c: &Common, text: &str) -> Result<()> {
    match &c.out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json(c: &Common, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(c, &text)
}

fn emit_distance(
    c: &Common,
    name: &str,
    value: f64,
    top: &[(copula_mom::MultiIndex, f64)],
) -> Result<()> {
    match format(c, Format::Json) {
        Format::Json => {
            let top: Vec<_> = top
                .iter()
                .map(|(idx, v)| json!({ "index": idx.0, "contribution": v }))
                .collect();
            emit_json(c, &json!({ name: value, "top": top }))
        }
        Format::Csv => {
            let mut out = String::from("index,contribution\n");
            for (idx, v) in top {
                writeln!(out, "\"{idx}\",{v}")?;
            }
            emit(c, &out)
        }
    }
}

/// Parses `[name=]train:test`.
fn parse_layer(spec: &str, position: usize) -> Result<LayerFiles> {
    let (name, files) = match spec.split_once('=') {
        Some((name, files)) => (name.to_string(), files),
        None => (format!("layer{position}"), spec),
    };
    let Some((train, test)) = files.split_once(':') else {
        bail!("layer {spec:?} must look like [name=]train:test");
    };
    Ok(LayerFiles {
        name,
        train: train.into(),
        test: test.into(),
    })
}

fn experiment_config(c: &Common, layers: &[String]) -> Result<ExperimentConfig> {
    let mut config = match &c.config {
        Some(path) => ExperimentConfig::from_json_file(path)?,
        None => ExperimentConfig::default(),
    };
    if !layers.is_empty() {
        config.layers = layers
            .iter()
            .enumerate()
            .map(|(i, s)| parse_layer(s, i))
            .collect::<Result<_>>()?;
    }
    if let Some(seed) = c.seed {
        config.seed = seed;
    }
    if config.layers.is_empty() {
        bail!("no layers given on the command line or in --config");
    }
    Ok(config)
}

fn load(config: &ExperimentConfig) -> Result<Vec<LayerData>> {
    config.validate()?;
    Ok(config
        .layers
        .iter()
        .enumerate()
        .map(|(i, files)| LayerData::load(files, i))
        .collect::<copula_mom::Result<_>>()?)
}

fn marginal_report(config: &ExperimentConfig) -> Result<MarginalExperimentReport> {
    Ok(experiment_on_layers(
        &load(config)?,
        &config.marginal,
        config.seed,
    )?)
}

fn emit_marginals(c: &Common, report: &MarginalExperimentReport) -> Result<()> {
    match format(c, Format::Json) {
        Format::Json => emit_json(c, report),
        Format::Csv => emit(c, &report.kl_csv()),
    }
}

fn comparison_csv(reports: &[ComparisonReport]) -> String {
    let mut out = String::from("layer,method,mean,lo,hi,best\n");
    for r in reports {
        for m in &r.methods {
            let best = r.significance.best == Some(m.method);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{best}",
                r.layer, m.method, m.mean, m.interval.0, m.interval.1
            );
        }
    }
    out
}
