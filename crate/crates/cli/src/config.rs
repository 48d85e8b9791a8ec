//! Run configuration: an optional JSON file merged with command-line flags.
//! Flags win. Relative paths in the file resolve against the file's directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, ValueEnum};
use defirisk::datamodel::YearMonth;
use defirisk::tailrisk::DependenceMode;
use defirisk::{Error, Result};
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 42;
pub const MIN_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Dependence {
    On,
    Off,
    Both,
}

impl From<Dependence> for DependenceMode {
    fn from(d: Dependence) -> Self {
        match d {
            Dependence::On => DependenceMode::On,
            Dependence::Off => DependenceMode::Off,
            Dependence::Both => DependenceMode::Both,
        }
    }
}

/// Externally supplied pricing inputs for one protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Override {
    pub attack_prob: f64,
    /// Expected fraction of TVL lost given an attack.
    #[serde(default)]
    pub loss_fraction: Option<f64>,
    /// E(Y²)/TVL² given an attack.
    #[serde(default)]
    pub loss_sq_fraction: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeverityWindowFile {
    pub start: Option<YearMonth>,
    pub end: Option<YearMonth>,
}

/// Contents of the `--config` file. Every field is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub incidents: Option<PathBuf>,
    pub tvl: Option<PathBuf>,
    pub portfolio: Option<PathBuf>,
    pub models: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub n_samples: Option<usize>,
    pub theta: Option<f64>,
    pub levels: Option<Vec<f64>>,
    pub output_format: Option<OutputFormat>,
    pub dependence: Option<DependenceMode>,
    pub workers: Option<usize>,
    /// Last month of the frequency training panels.
    pub window_end: Option<YearMonth>,
    pub severity_window: Option<SeverityWindowFile>,
    pub pricing_date: Option<NaiveDate>,
    pub coverage_fraction: Option<f64>,
    pub hl_groups: Option<usize>,
    #[serde(default)]
    pub overrides: BTreeMap<String, Override>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct GlobalArgs {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte Carlo sample count (ratio moments for `price`, paths for `simulate`).
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Premium loading.
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    /// Risk levels, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub levels: Option<Vec<f64>>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    /// Simulation worker threads; 0 uses every core. Never changes results.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Directory for every output file.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Incidents CSV.
    #[arg(long, global = true)]
    pub incidents: Option<PathBuf>,
    /// Monthly TVL CSV.
    #[arg(long, global = true)]
    pub tvl: Option<PathBuf>,
    /// Portfolio JSON.
    #[arg(long, global = true)]
    pub portfolio: Option<PathBuf>,
    /// Directory holding fitted model files (defaults to the output directory).
    #[arg(long, global = true)]
    pub models: Option<PathBuf>,
    /// JSON object mapping protocol id to {attack_prob, loss_fraction, loss_sq_fraction}.
    #[arg(long, global = true)]
    pub overrides: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub dependence: Option<Dependence>,
}

/// Fully resolved settings for one command.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub incidents: Option<PathBuf>,
    pub tvl: Option<PathBuf>,
    pub portfolio: Option<PathBuf>,
    pub models: PathBuf,
    pub output: PathBuf,
    pub seed: u64,
    pub n_samples: Option<usize>,
    pub theta: Option<f64>,
    pub levels: Vec<f64>,
    pub format: OutputFormat,
    pub dependence: DependenceMode,
    pub workers: usize,
    pub window_end: Option<YearMonth>,
    pub severity_start: Option<YearMonth>,
    pub severity_end: Option<YearMonth>,
    pub pricing_date: Option<NaiveDate>,
    pub coverage_fraction: f64,
    pub hl_groups: usize,
    pub overrides: BTreeMap<String, Override>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn resolve(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

impl RunConfig {
    pub fn from_args(args: &GlobalArgs) -> Result<Self> {
        let (file, base) = match &args.config {
            Some(path) => {
                let file: ConfigFile = read_json(path)?;
                let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
                (file, base)
            }
            None => (ConfigFile::default(), PathBuf::new()),
        };
        let from_file = |p: Option<PathBuf>| p.map(|p| resolve(&base, p));

        let mut overrides = file.overrides;
        if let Some(path) = &args.overrides {
            let extra: BTreeMap<String, Override> = read_json(path)?;
            overrides.extend(extra);
        }
        let output = args.output.clone().or_else(|| from_file(file.output)).unwrap_or_else(|| PathBuf::from("out"));
        let models = args.models.clone().or_else(|| from_file(file.models)).unwrap_or_else(|| output.clone());
        let window = file.severity_window.unwrap_or_default();
        let cfg = RunConfig {
            incidents: args.incidents.clone().or_else(|| from_file(file.incidents)),
            tvl: args.tvl.clone().or_else(|| from_file(file.tvl)),
            portfolio: args.portfolio.clone().or_else(|| from_file(file.portfolio)),
            models,
            output,
            seed: args.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            n_samples: args.samples.or(file.n_samples),
            theta: args.theta.or(file.theta),
            levels: args.levels.clone().or(file.levels).unwrap_or_else(|| vec![0.90, 0.95, 0.99]),
            format: args.format.or(file.output_format).unwrap_or_default(),
            dependence: args.dependence.map(Into::into).or(file.dependence).unwrap_or_default(),
            workers: args.workers.or(file.workers).unwrap_or(0),
            window_end: file.window_end,
            severity_start: window.start,
            severity_end: window.end,
            pricing_date: file.pricing_date,
            coverage_fraction: file.coverage_fraction.unwrap_or(1.0),
            hl_groups: file.hl_groups.unwrap_or(10),
            overrides,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if let Some(n) = self.n_samples {
            if n < MIN_SAMPLES {
                return Err(Error::Config(format!("n_samples must be at least {MIN_SAMPLES}, got {n}")));
            }
        }
        if let Some(t) = self.theta {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("theta must be nonnegative, got {t}")));
            }
        }
        if self.levels.is_empty() {
            return Err(Error::Config("levels must not be empty".into()));
        }
        if let Some(q) = self.levels.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
            return Err(Error::Config(format!("level {q} outside (0, 1)")));
        }
        if !(self.coverage_fraction > 0.0 && self.coverage_fraction <= 1.0) {
            return Err(Error::Config(format!("coverage_fraction must lie in (0, 1], got {}", self.coverage_fraction)));
        }
        if self.hl_groups < 3 {
            return Err(Error::Config("hl_groups must be at least 3".into()));
        }
        for (id, o) in &self.overrides {
            let probs = [Some(o.attack_prob), o.loss_fraction, o.loss_sq_fraction];
            if probs.iter().flatten().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::Config(format!("override for {id} has a value outside [0, 1]")));
            }
        }
        for p in [&self.incidents, &self.tvl, &self.portfolio].into_iter().flatten() {
            if !p.exists() {
                return Err(Error::Config(format!("input file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn require<'a>(&self, path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
        path.as_deref().ok_or_else(|| Error::Config(format!("this command needs --{what}")))
    }
}
