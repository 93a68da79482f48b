use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use pcsinit_cli::config::ExperimentConfig;
use pcsinit_cli::experiment;
use pcsinit_core::Variant;

#[derive(Parser)]
#[command(name = "pcsinit", version, about = "Train and inspect PCA-initialized networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every selected variant over repeated splits.
    Run(Common),
    /// Run the numerical property checks on the repeat-0 training split.
    Verify(Common),
    /// Explain saved repeat-0 models with Kernel SHAP.
    Explain(Common),
    /// Fit PCA on the standardized dataset and report the kept components.
    Pca(Common),
}

#[derive(Args)]
struct Common {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV path, or `synthetic`.
    #[arg(long)]
    dataset: Option<String>,
    /// `last`, a zero-based index or a header name.
    #[arg(long)]
    label_column: Option<String>,
    /// May be repeated; `pcsinit_sub:0.3` sets the subset fraction.
    #[arg(long = "variant")]
    variants: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    subset_fraction: Option<f64>,
    #[arg(long)]
    variance_threshold: Option<f64>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    n_frozen: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    shap_points: Option<usize>,
    /// Any config key, e.g. `--set batch_size=32`. Applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let mut flags: Vec<(&str, String)> = Vec::new();
        if let Some(v) = &self.dataset {
            flags.push(("dataset", v.clone()));
        }
        if let Some(v) = &self.label_column {
            flags.push(("label_column", v.clone()));
        }
        if !self.variants.is_empty() {
            flags.push(("variants", self.variants.join(",")));
        }
        let mut push = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                flags.push((k, v));
            }
        };
        push("seed", self.seed.map(|v| v.to_string()));
        push("repeats", self.repeats.map(|v| v.to_string()));
        push("out", self.out.as_ref().map(|v| v.display().to_string()));
        push("subset_fraction", self.subset_fraction.map(|v| v.to_string()));
        push("variance_threshold", self.variance_threshold.map(|v| v.to_string()));
        push("noise_sigma", self.noise_sigma.map(|v| v.to_string()));
        push("n_frozen", self.n_frozen.map(|v| v.to_string()));
        push("epochs", self.epochs.map(|v| v.to_string()));
        push("shap_points", self.shap_points.map(|v| v.to_string()));
        for (k, v) in flags {
            cfg.set(k, &v)?;
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| anyhow::anyhow!("--set expects KEY=VALUE, got {kv:?}"))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(common) => {
            let cfg = common.resolve()?;
            let result = experiment::run_experiment(&cfg)?;
            println!("{:<14} {:>5} {:>10} {:>10}", "variant", "runs", "test_acc", "std");
            for v in &result.summary.variants {
                println!(
                    "{:<14} {:>5} {:>10.4} {:>10.4}",
                    v.variant, v.runs, v.final_test_acc_mean, v.final_test_acc_std
                );
            }
            for f in &result.summary.failures {
                eprintln!("failed: repeat {} {}: {}", f.repeat, f.variant, f.error);
            }
            println!("outputs in {}", cfg.out.display());
            Ok(result.summary.failures.is_empty())
        }
        Command::Verify(common) => {
            let cfg = common.resolve()?;
            let reports = experiment::verify(&cfg)?;
            for r in &reports {
                println!(
                    "{:<24} {} (tolerance {:e}, trials {})",
                    r.theorem_id.as_str(),
                    if r.pass { "PASS" } else { "FAIL" },
                    r.tolerance,
                    r.trials
                );
            }
            Ok(reports.iter().all(|r| r.pass))
        }
        Command::Explain(common) => {
            let mut cfg = common.resolve()?;
            if cfg.shap.is_none() {
                cfg.set("shap_points", "10")?;
            }
            let variants: Vec<Variant> = cfg.resolved_variants();
            for (v, out) in experiment::explain_saved(&cfg, &variants)? {
                println!("{v}: explained {} points", out.feature_attributions.len());
            }
            Ok(true)
        }
        Command::Pca(common) => {
            let cfg = common.resolve()?;
            let model = experiment::pca_report(&cfg)?;
            let total: f64 = model.explained_variance_ratio.iter().sum();
            println!(
                "kept {} of {} components, explained variance {:.4}",
                model.n_components(),
                model.n_features(),
                total
            );
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
