//! Repeated training runs, their on-disk outputs, and the explanation and
//! verification passes built on top of them.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use pcsinit_core::data::{self, Dataset, Standardization};
use pcsinit_core::explain::{self, ShapConfig, UnitKind};
use pcsinit_core::network;
use pcsinit_core::pca;
use pcsinit_core::rng::derive_seed;
use pcsinit_core::theory::{self, SuiteOptions};
use pcsinit_core::training::{self, Phase, TrainOutcome};
use pcsinit_core::{Attribution, ComponentSelection, Matrix, Mlp, PcaModel, TheoremReport, Variant};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{DatasetSource, ExperimentConfig, ShapSettings};

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    match &cfg.dataset {
        DatasetSource::Csv { path, has_header, .. } => {
            let label = cfg.label_column().expect("csv source");
            data::load_csv(path, &label, *has_header).with_context(|| format!("loading {}", path.display()))
        }
        DatasetSource::Synthetic { kind, n, p, n_classes, params } => {
            Ok(data::make_synthetic(*kind, *n, *p, *n_classes, *params, cfg.seed)?)
        }
    }
}

pub fn repeat_seed(cfg: &ExperimentConfig, repeat: usize) -> u64 {
    derive_seed(&[cfg.seed, repeat as u64])
}

/// The standardized (and optionally noised) train/test split of one repeat.
pub fn repeat_split(cfg: &ExperimentConfig, ds: &Dataset, repeat: usize) -> Result<(Dataset, Dataset)> {
    let seed = repeat_seed(cfg, repeat);
    let (mut train, mut test) = data::split(ds, cfg.train_fraction, seed)?;
    if let Some(sigma) = cfg.noise_sigma {
        train = data::add_gaussian_noise(&train, sigma, derive_seed(&[seed, 0]))?;
        test = data::add_gaussian_noise(&test, sigma, derive_seed(&[seed, 1]))?;
    }
    Ok((train, test))
}

/// What a checkpoint's network expects as input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    StandardizedFeatures,
    ComponentScores,
}

/// Everything besides the weights needed to apply a trained network to raw rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub variant: Variant,
    pub input: InputKind,
    pub standardization: Standardization,
    pub pca: PcaModel,
}

impl Pipeline {
    /// Map standardized features to the network's input space.
    pub fn network_input(&self, x: &Matrix) -> Result<Matrix> {
        Ok(match self.input {
            InputKind::StandardizedFeatures => x.clone(),
            InputKind::ComponentScores => pca::project(&self.pca, x)?,
        })
    }
}

fn model_paths(out: &Path, repeat: usize, variant: &Variant) -> (PathBuf, PathBuf) {
    let dir = out.join("models").join(format!("r{repeat}"));
    (dir.join(format!("{}.bin", variant.name())), dir.join(format!("{}.json", variant.name())))
}

pub fn load_model(out: &Path, repeat: usize, variant: &Variant) -> Result<(Mlp, Pipeline)> {
    let (bin, json) = model_paths(out, repeat, variant);
    let net = network::load_checkpoint_file(&bin).with_context(|| format!("loading {}", bin.display()))?;
    let pipeline: Pipeline = serde_json::from_reader(File::open(&json).with_context(|| json.display().to_string())?)?;
    Ok((net, pipeline))
}

#[derive(Debug, Clone, Serialize)]
struct MetricsLine<'a> {
    run_id: String,
    variant: &'a str,
    epoch: usize,
    phase: Phase,
    train_loss: f64,
    train_acc: f64,
    test_loss: f64,
    test_acc: f64,
    seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_loss: f64,
    pub test_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantSummary {
    pub variant: String,
    pub runs: usize,
    pub final_test_acc_mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub final_test_acc_std: f64,
    pub final_test_loss_mean: f64,
    pub n_components_mean: f64,
    pub mean_curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub repeat: usize,
    pub variant: String,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub n_rows: usize,
    pub n_features: usize,
    pub n_classes: usize,
    pub variants: Vec<VariantSummary>,
    pub failures: Vec<Failure>,
}

/// One trained network.
pub struct Run {
    pub repeat: usize,
    pub variant: Variant,
    pub outcome: TrainOutcome,
}

pub struct ExperimentResult {
    pub summary: Summary,
    pub runs: Vec<Run>,
    pub theorem_reports: Vec<TheoremReport>,
}

pub fn thread_pool(cfg: &ExperimentConfig) -> Result<rayon::ThreadPool> {
    let from_env = std::env::var("PCSINIT_THREADS").ok().and_then(|v| v.parse::<usize>().ok());
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = from_env.or(cfg.threads) {
        builder = builder.num_threads(n);
    }
    Ok(builder.build()?)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn summarize(variant: &Variant, runs: &[&Run]) -> Option<VariantSummary> {
    let finals: Vec<_> = runs.iter().filter_map(|r| r.outcome.record.last()).collect();
    if finals.is_empty() {
        return None;
    }
    let acc: Vec<f64> = finals.iter().map(|m| m.test_acc).collect();
    let loss: Vec<f64> = finals.iter().map(|m| m.test_loss).collect();
    let comps: Vec<f64> = runs.iter().map(|r| r.outcome.pca.n_components() as f64).collect();
    let n_epochs = runs.iter().map(|r| r.outcome.record.epochs.len()).min().unwrap_or(0);
    let mean_curve = (0..n_epochs)
        .map(|e| {
            let at = |f: fn(&training::EpochMetrics) -> f64| {
                mean(&runs.iter().map(|r| f(&r.outcome.record.epochs[e])).collect::<Vec<_>>())
            };
            CurvePoint {
                epoch: e + 1,
                train_loss: at(|m| m.train_loss),
                train_acc: at(|m| m.train_acc),
                test_loss: at(|m| m.test_loss),
                test_acc: at(|m| m.test_acc),
            }
        })
        .collect();
    Some(VariantSummary {
        variant: variant.to_string(),
        runs: runs.len(),
        final_test_acc_mean: mean(&acc),
        final_test_acc_std: sample_std(&acc),
        final_test_loss_mean: mean(&loss),
        n_components_mean: mean(&comps),
        mean_curve,
    })
}

pub fn suite_options(cfg: &ExperimentConfig, n_classes: usize) -> SuiteOptions {
    SuiteOptions {
        selection: ComponentSelection::VarianceThreshold(cfg.variance_threshold),
        n_layers: cfg.n_layers,
        n_classes,
        seed: cfg.seed,
        sigma: cfg.theory_sigma,
        ..SuiteOptions::default()
    }
}

/// Train every variant on every repeat and write all outputs under `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let ds = load_dataset(cfg)?;
    let variants = cfg.resolved_variants();
    let pool = thread_pool(cfg)?;

    let splits: Vec<Result<(Dataset, Dataset)>> = (0..cfg.repeats).map(|r| repeat_split(cfg, &ds, r)).collect();
    let jobs: Vec<(usize, Variant)> = (0..cfg.repeats)
        .flat_map(|r| variants.iter().map(move |v| (r, *v)))
        .collect();
    let results: Vec<Result<TrainOutcome>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(r, v)| {
                let (train, test) = splits[r].as_ref().map_err(|e| anyhow!("{e:#}"))?;
                log::info!("repeat {r}: training {v}");
                Ok(training::train(&cfg.train_config(v, repeat_seed(cfg, r)), train, test)?)
            })
            .collect()
    });

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (&(repeat, variant), res) in jobs.iter().zip(results) {
        match res {
            Ok(outcome) => runs.push(Run { repeat, variant, outcome }),
            Err(e) => {
                log::error!("repeat {repeat}, {variant}: {e:#}");
                failures.push(Failure { repeat, variant: variant.to_string(), error: format!("{e:#}") });
            }
        }
    }

    let summaries = variants
        .iter()
        .filter_map(|v| {
            let of_v: Vec<&Run> = runs.iter().filter(|r| r.variant == *v).collect();
            summarize(v, &of_v)
        })
        .collect();
    let summary = Summary {
        config: cfg.clone(),
        n_rows: ds.n_rows(),
        n_features: ds.n_features(),
        n_classes: ds.n_classes,
        variants: summaries,
        failures,
    };

    let theorem_reports = match &splits[0] {
        Ok((train, _)) => pool.install(|| theory::run_suite(&train.features, &suite_options(cfg, ds.n_classes)))
            .unwrap_or_else(|e| {
                log::error!("theorem checks: {e}");
                Vec::new()
            }),
        Err(_) => Vec::new(),
    };

    write_outputs(cfg, &runs, &splits, &summary, &theorem_reports)?;
    if let Some(shap) = &cfg.shap {
        if let Ok((train, test)) = &splits[0] {
            for run in runs.iter().filter(|r| r.repeat == 0) {
                let pipeline = pipeline_for(run, train);
                pool.install(|| explain_variant(&cfg.out, &run.outcome.net, &pipeline, train, test, shap))?;
            }
        }
    }
    Ok(ExperimentResult { summary, runs, theorem_reports })
}

fn pipeline_for(run: &Run, train: &Dataset) -> Pipeline {
    Pipeline {
        variant: run.variant,
        input: if run.variant == Variant::PcaNn {
            InputKind::ComponentScores
        } else {
            InputKind::StandardizedFeatures
        },
        standardization: train.standardization.clone().expect("split is standardized"),
        pca: run.outcome.pca.clone(),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_outputs(
    cfg: &ExperimentConfig,
    runs: &[Run],
    splits: &[Result<(Dataset, Dataset)>],
    summary: &Summary,
    reports: &[TheoremReport],
) -> Result<()> {
    let out = &cfg.out;
    fs::create_dir_all(out)?;

    let mut metrics = create(&out.join("metrics.jsonl"))?;
    let mut timing = create(&out.join("timing.csv"))?;
    writeln!(timing, "variant,repeat,epoch,epoch_seconds,cumulative_seconds,pca_fit_seconds")?;
    for run in runs {
        let name = run.variant.name();
        let mut cumulative = run.outcome.pca_fit_seconds;
        for m in &run.outcome.record.epochs {
            let line = MetricsLine {
                run_id: format!("r{}", run.repeat),
                variant: name,
                epoch: m.epoch,
                phase: m.phase,
                train_loss: m.train_loss,
                train_acc: m.train_acc,
                test_loss: m.test_loss,
                test_acc: m.test_acc,
                seconds: m.seconds,
            };
            serde_json::to_writer(&mut metrics, &line)?;
            writeln!(metrics)?;
            cumulative += m.seconds;
            writeln!(
                timing,
                "{name},{},{},{},{},{}",
                run.repeat, m.epoch, m.seconds, cumulative, run.outcome.pca_fit_seconds
            )?;
        }
        if let Ok((train, _)) = &splits[run.repeat] {
            let (bin, json) = model_paths(out, run.repeat, &run.variant);
            fs::create_dir_all(bin.parent().expect("model dir"))?;
            network::save_checkpoint_file(&run.outcome.net, &bin)?;
            write_json(&json, &pipeline_for(run, train))?;
        }
    }
    metrics.flush()?;
    timing.flush()?;
    write_json(&out.join("summary.json"), summary)?;
    write_json(&out.join("theorem_reports.json"), &reports)?;
    Ok(())
}

fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut p = logits.clone();
    for i in 0..p.rows() {
        let row = p.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.iter_mut().for_each(|v| *v = (*v - max).exp());
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    p
}

/// Files written for one explained variant.
#[derive(Debug, Clone, Default)]
pub struct ExplainOutputs {
    pub feature_attributions: Vec<Attribution>,
    pub component_attributions: Vec<Attribution>,
}

/// Explain the class probabilities of the first `shap.points` test rows and
/// write the per-point, heatmap and global-importance CSVs under
/// `out/shap/<variant>/`.
pub fn explain_variant(
    out: &Path,
    net: &Mlp,
    pipeline: &Pipeline,
    train: &Dataset,
    test: &Dataset,
    shap: &ShapSettings,
) -> Result<ExplainOutputs> {
    let dir = out.join("shap").join(pipeline.variant.name());
    fs::create_dir_all(&dir)?;
    let n_points = shap.points.min(test.n_rows());
    let points = pipeline.network_input(&test.features.leading_rows(n_points))?;
    let bg_rows = explain::sample_background(&train.features, shap.background, shap.seed);
    let config = ShapConfig {
        n_coalitions: shap.n_coalitions,
        seed: shap.seed,
        ..ShapConfig::exact(pipeline.network_input(&bg_rows)?)
    };
    let predict = |x: &Matrix| -> pcsinit_core::Result<Matrix> { Ok(softmax_rows(&net.predict(x)?)) };

    let attrs: Vec<Attribution> = (0..n_points)
        .into_par_iter()
        .map(|i| explain::kernel_shap(predict, points.row(i), &config))
        .collect::<pcsinit_core::Result<_>>()?;

    let mut result = ExplainOutputs::default();
    if pipeline.input == InputKind::ComponentScores {
        let comps: Vec<Attribution> = attrs.into_iter().map(|a| a.with_unit_kind(UnitKind::PrincipalComponent)).collect();
        let mut heat: Option<Vec<Matrix>> = None;
        for (i, a) in comps.iter().enumerate() {
            explain::write_attribution_csv(a, create(&dir.join(format!("point_{i}_components.csv")))?)?;
            let bp = explain::back_project(a, &pipeline.pca)?;
            explain::write_attribution_csv(&bp.attribution, create(&dir.join(format!("point_{i}.csv")))?)?;
            let abs: Vec<Matrix> = bp
                .contributions
                .iter()
                .map(|m| Matrix::from_fn(m.rows(), m.cols(), |j, k| m.get(j, k).abs() / n_points as f64))
                .collect();
            heat = Some(match heat {
                None => abs,
                Some(acc) => acc.iter().zip(&abs).map(|(a, b)| a.add(b)).collect::<pcsinit_core::Result<_>>()?,
            });
            result.feature_attributions.push(bp.attribution);
        }
        for (c, m) in heat.iter().flatten().enumerate() {
            explain::write_heatmap_csv(m, create(&dir.join(format!("heatmap_class_{c}.csv")))?)?;
        }
        if !comps.is_empty() {
            let gi = explain::global_importance(&comps)?;
            explain::write_global_importance_csv(&gi, create(&dir.join("global_importance_components.csv"))?)?;
        }
        result.component_attributions = comps;
    } else {
        for (i, a) in attrs.iter().enumerate() {
            explain::write_attribution_csv(a, create(&dir.join(format!("point_{i}.csv")))?)?;
        }
        result.feature_attributions = attrs;
    }
    if !result.feature_attributions.is_empty() {
        let gi = explain::global_importance(&result.feature_attributions)?;
        explain::write_global_importance_csv(&gi, create(&dir.join("global_importance.csv"))?)?;
    }
    Ok(result)
}

/// Explain saved repeat-0 models without retraining.
pub fn explain_saved(cfg: &ExperimentConfig, variants: &[Variant]) -> Result<Vec<(Variant, ExplainOutputs)>> {
    let shap = cfg.shap.clone().ok_or_else(|| anyhow!("no SHAP settings; set shap_points"))?;
    let ds = load_dataset(cfg)?;
    let (train, test) = repeat_split(cfg, &ds, 0)?;
    let pool = thread_pool(cfg)?;
    variants
        .iter()
        .map(|v| {
            let (net, pipeline) = load_model(&cfg.out, 0, v)?;
            let outputs = pool.install(|| explain_variant(&cfg.out, &net, &pipeline, &train, &test, &shap))?;
            Ok((*v, outputs))
        })
        .collect()
}

/// Run the theorem checks on the repeat-0 training features.
pub fn verify(cfg: &ExperimentConfig) -> Result<Vec<TheoremReport>> {
    cfg.validate()?;
    let ds = load_dataset(cfg)?;
    let (train, _) = repeat_split(cfg, &ds, 0)?;
    let reports = thread_pool(cfg)?.install(|| theory::run_suite(&train.features, &suite_options(cfg, ds.n_classes)))?;
    write_json(&cfg.out.join("theorem_reports.json"), &reports)?;
    Ok(reports)
}

/// Fit PCA on the whole standardized dataset; writes `pca.json` and
/// `pca_report.csv`.
pub fn pca_report(cfg: &ExperimentConfig) -> Result<PcaModel> {
    let ds = load_dataset(cfg)?;
    let x = Standardization::fit(&ds.features).apply(&ds.features)?;
    let model = pca::fit(&x, ComponentSelection::VarianceThreshold(cfg.variance_threshold))?;
    write_json(&cfg.out.join("pca.json"), &model)?;
    let mut w = create(&cfg.out.join("pca_report.csv"))?;
    writeln!(w, "component,eigenvalue,explained_variance_ratio,cumulative_ratio")?;
    let mut cumulative = 0.0;
    for (k, (ev, ratio)) in model.eigenvalues.iter().zip(&model.explained_variance_ratio).enumerate() {
        cumulative += ratio;
        writeln!(w, "{k},{ev},{ratio},{cumulative}")?;
    }
    w.flush()?;
    Ok(model)
}
