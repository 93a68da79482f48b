//! Experiment configuration: a flat `key = value` file with command-line
//! overrides. Precedence is flag, then file, then default.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use pcsinit_core::data::{LabelColumn, SyntheticKind, SyntheticParams};
use pcsinit_core::training::{BaselineInit, TrainConfig, Variant};
use pcsinit_core::ComponentSelection;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "source")]
pub enum DatasetSource {
    Csv {
        path: PathBuf,
        label_column: String,
        has_header: bool,
    },
    Synthetic {
        kind: SyntheticKind,
        n: usize,
        p: usize,
        n_classes: usize,
        params: SyntheticParams,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapSettings {
    /// Test points explained per variant.
    pub points: usize,
    /// Training rows used as the masking background.
    pub background: usize,
    /// 0 enumerates every coalition (only for at most 15 inputs).
    pub n_coalitions: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub variants: Vec<Variant>,
    pub repeats: usize,
    pub train_fraction: f64,
    pub variance_threshold: f64,
    pub n_layers: usize,
    pub n_frozen: usize,
    pub epochs: usize,
    pub subset_fraction: f64,
    pub baseline_initializer: BaselineInit,
    pub learning_rate: f64,
    pub batch_size: Option<usize>,
    pub noise_sigma: Option<f64>,
    pub shap: Option<ShapSettings>,
    /// Noise level used by the theorem checks.
    pub theory_sigma: f64,
    #[serde(skip)]
    pub out: PathBuf,
    pub seed: u64,
    #[serde(skip)]
    pub threads: Option<usize>,
}

/// The default dataset: a synthetic stand-in with the shape of a small
/// clinical table (267 rows, 44 features, 2 classes).
pub fn default_dataset() -> DatasetSource {
    let kind = SyntheticKind::LowRankPlusNoise;
    DatasetSource::Synthetic {
        kind,
        n: 267,
        p: 44,
        n_classes: 2,
        params: kind.default_params(),
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            dataset: default_dataset(),
            variants: Variant::all(Variant::DEFAULT_SUBSET_FRACTION).to_vec(),
            repeats: 10,
            train_fraction: 0.7,
            variance_threshold: 0.95,
            n_layers: t.n_layers,
            n_frozen: t.n_frozen,
            epochs: t.n_total,
            subset_fraction: Variant::DEFAULT_SUBSET_FRACTION,
            baseline_initializer: t.baseline_initializer,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            noise_sigma: None,
            shap: None,
            theory_sigma: 1.0,
            out: PathBuf::from("out"),
            seed: 0,
            threads: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow!("invalid value {value:?} for {key}: {e}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => bail!("invalid boolean {value:?} for {key}"),
    }
}

fn optional<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    if value.is_empty() || value == "none" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

impl ExperimentConfig {
    /// Read `key = value` lines; `#` starts a comment.
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_file(path)?;
        Ok(cfg)
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        self.apply_text(&text)
            .with_context(|| format!("in config {}", path.display()))
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", no + 1))?;
            self.set(k.trim(), v.trim())
                .with_context(|| format!("line {}", no + 1))?;
        }
        Ok(())
    }

    fn synthetic_mut(&mut self) -> &mut DatasetSource {
        if matches!(self.dataset, DatasetSource::Csv { .. }) {
            self.dataset = default_dataset();
        }
        &mut self.dataset
    }

    fn shap_mut(&mut self) -> &mut ShapSettings {
        self.shap.get_or_insert(ShapSettings {
            points: 10,
            background: 100,
            n_coalitions: 2048,
            seed: 0,
        })
    }

    /// Set one key. Keys match the command-line flag names with `_` for `-`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.replace('-', "_");
        let key = key.as_str();
        match key {
            "dataset" => {
                self.dataset = if value == "synthetic" {
                    default_dataset()
                } else {
                    let (label_column, has_header) = match &self.dataset {
                        DatasetSource::Csv { label_column, has_header, .. } => (label_column.clone(), *has_header),
                        _ => ("last".to_string(), true),
                    };
                    DatasetSource::Csv { path: PathBuf::from(value), label_column, has_header }
                }
            }
            "label_column" | "has_header" => match &mut self.dataset {
                DatasetSource::Csv { label_column, has_header, .. } => {
                    if key == "label_column" {
                        *label_column = value.to_string();
                    } else {
                        *has_header = parse_bool(key, value)?;
                    }
                }
                DatasetSource::Synthetic { .. } => bail!("{key} needs a CSV dataset; set dataset first"),
            },
            "synthetic_kind" | "synthetic_n" | "synthetic_p" | "synthetic_classes" | "synthetic_separation"
            | "synthetic_noise" | "synthetic_rank" => {
                let DatasetSource::Synthetic { kind, n, p, n_classes, params } = self.synthetic_mut() else {
                    unreachable!()
                };
                match key {
                    "synthetic_kind" => {
                        *kind = value.parse().map_err(|e| anyhow!("{e}"))?;
                        *params = kind.default_params();
                    }
                    "synthetic_n" => *n = parse(key, value)?,
                    "synthetic_p" => *p = parse(key, value)?,
                    "synthetic_classes" => *n_classes = parse(key, value)?,
                    "synthetic_separation" => params.separation = parse(key, value)?,
                    "synthetic_noise" => params.noise_std = parse(key, value)?,
                    _ => params.rank = parse(key, value)?,
                }
            }
            "variants" | "variant" => {
                self.variants = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<Variant>().map_err(|e| anyhow!("{e}")))
                    .collect::<Result<_>>()?;
            }
            "repeats" => self.repeats = parse(key, value)?,
            "train_fraction" => self.train_fraction = parse(key, value)?,
            "variance_threshold" => self.variance_threshold = parse(key, value)?,
            "n_layers" => self.n_layers = parse(key, value)?,
            "n_frozen" => self.n_frozen = parse(key, value)?,
            "epochs" | "n_total" => self.epochs = parse(key, value)?,
            "subset_fraction" => self.subset_fraction = parse(key, value)?,
            "baseline_initializer" => {
                self.baseline_initializer = value.parse().map_err(|e| anyhow!("{e}"))?
            }
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "batch_size" => self.batch_size = optional(key, value)?,
            "noise_sigma" => self.noise_sigma = optional(key, value)?,
            "theory_sigma" => self.theory_sigma = parse(key, value)?,
            "shap_points" => self.shap_mut().points = parse(key, value)?,
            "shap_background" => self.shap_mut().background = parse(key, value)?,
            "shap_coalitions" => self.shap_mut().n_coalitions = parse(key, value)?,
            "shap_seed" => self.shap_mut().seed = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "seed" => self.seed = parse(key, value)?,
            "threads" => self.threads = optional(key, value)?,
            other => bail!("unknown config key {other:?}"),
        }
        Ok(())
    }

    /// The variants with `pcsinit_sub` carrying the configured fraction.
    pub fn resolved_variants(&self) -> Vec<Variant> {
        self.variants
            .iter()
            .map(|v| match v {
                Variant::PcsInitSub { .. } => Variant::PcsInitSub { subset_fraction: self.subset_fraction },
                other => *other,
            })
            .collect()
    }

    pub fn label_column(&self) -> Option<LabelColumn> {
        match &self.dataset {
            DatasetSource::Csv { label_column, .. } => Some(label_column.parse().expect("infallible")),
            DatasetSource::Synthetic { .. } => None,
        }
    }

    pub fn train_config(&self, variant: Variant, seed: u64) -> TrainConfig {
        TrainConfig {
            variant,
            n_frozen: self.n_frozen,
            n_total: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            seed,
            baseline_initializer: self.baseline_initializer,
            n_layers: self.n_layers,
            selection: ComponentSelection::VarianceThreshold(self.variance_threshold),
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            bail!("repeats must be at least 1");
        }
        if self.variants.is_empty() {
            bail!("no variants selected");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            bail!("train_fraction must lie in (0, 1)");
        }
        if let Some(s) = self.noise_sigma {
            if s.is_nan() || s < 0.0 {
                bail!("noise_sigma must be >= 0");
            }
        }
        if let Some(shap) = &self.shap {
            if shap.background == 0 {
                bail!("shap_background must be at least 1");
            }
        }
        ComponentSelection::VarianceThreshold(self.variance_threshold)
            .validate(usize::MAX)
            .map_err(|e| anyhow!("{e}"))?;
        for v in self.resolved_variants() {
            self.train_config(v, self.seed)
                .validate()
                .map_err(|e| anyhow!("{e}"))?;
        }
        Ok(())
    }
}
