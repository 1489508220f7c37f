//! `motioncf` command line: synthetic data, training, single-instance
//! explanations, the counterfactual evaluation table, the cross-validated
//! classifier benchmark and paired-motion export.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use motioncf::cfengine::{latent_cf, nn_cf, CFResult, Method};
use motioncf::dataset::{write_motion_file, Dataset, MotionSample, StrokeQuality};
use motioncf::harness::{
    emit_table, export_motion, run_cf_evaluation, run_cv_benchmark, train_bundle, DataSource, ExperimentConfig,
    TableFormat,
};
use motioncf::models::ModelBundle;
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "motioncf",
    version,
    about = "Latent-space counterfactual guidance for stroke motions"
)]
struct Cli {
    /// Experiment config (TOML). Defaults apply to every omitted key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured synthetic dataset as a motion file.
    GenData,
    /// Train the classifier and autoencoder and save a model bundle.
    Train,
    /// Explain one instance and print the result as JSON.
    Explain(ExplainArgs),
    /// Run every method on held-out instances and write the metric table.
    Evaluate(EvaluateArgs),
    /// Cross-validate the classifiers and write the score table.
    Benchmark,
    /// Explain one instance and write the paired-motion file.
    Export(ExportArgs),
}

#[derive(Args)]
struct Target {
    /// Target class; overrides the config.
    #[arg(long)]
    target: Option<StrokeQuality>,
}

#[derive(Args)]
struct ExplainArgs {
    /// Sample id in the configured dataset.
    #[arg(long)]
    instance: String,
    #[arg(long, default_value = "latent")]
    method: Method,
    #[command(flatten)]
    target: Target,
    /// Model bundle; defaults to `<out>/bundle.mcf`.
    #[arg(long)]
    bundle: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    target: Target,
    /// Evaluate this bundle instead of training one.
    #[arg(long)]
    bundle: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    explain: ExplainArgs,
    /// Output file; defaults to `<out>/<instance>-<method>.motion`.
    #[arg(long)]
    file: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let category = err
                .chain()
                .find_map(|e| e.downcast_ref::<motioncf::Error>())
                .map(|e| e.category());
            let message = describe(&err);
            match category {
                Some(c) => {
                    eprintln!("error [{}]: {message}", c.as_str());
                    ExitCode::from(c.exit_code() as u8)
                }
                None => {
                    eprintln!("error: {message}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}

/// The error chain joined with `: `, skipping causes whose text the
/// previous message already includes.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    cfg.validate()?;
    match cli.command {
        Command::GenData => gen_data(&cfg),
        Command::Train => train(&cfg),
        Command::Explain(args) => {
            let e = explain(&mut cfg, &args)?;
            println!("{}", serde_json::to_string_pretty(&summary(&e.result))?);
            Ok(())
        }
        Command::Evaluate(args) => evaluate(&mut cfg, &args),
        Command::Benchmark => benchmark(&cfg),
        Command::Export(args) => export(&mut cfg, &args),
    }
}

fn create_out(cfg: &ExperimentConfig) -> Result<&Path> {
    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    Ok(&cfg.out_dir)
}

fn gen_data(cfg: &ExperimentConfig) -> Result<()> {
    if !matches!(cfg.data, DataSource::Synthetic(_)) {
        bail!(motioncf::Error::Config("gen-data needs a synthetic data source".into()));
    }
    let ds = cfg.load_dataset()?;
    let path = create_out(cfg)?.join("dataset.csv");
    write_motion_file(&path, &ds)?;
    println!("wrote {} samples to {}", ds.len(), path.display());
    Ok(())
}

fn train_and_save(cfg: &ExperimentConfig, ds: &Dataset) -> Result<ModelBundle> {
    let bundle = train_bundle(cfg, ds)?;
    let out = create_out(cfg)?;
    bundle.save(&out.join("bundle.mcf"))?;
    fs::write(out.join("config.toml"), cfg.to_toml()?).context("writing config.toml")?;
    Ok(bundle)
}

fn train(cfg: &ExperimentConfig) -> Result<()> {
    let ds = cfg.load_dataset()?;
    let bundle = train_and_save(cfg, &ds)?;
    println!("wrote {}", cfg.out_dir.join("bundle.mcf").display());
    for (k, v) in &bundle.manifest {
        println!("  {k}: {v}");
    }
    Ok(())
}

fn load_bundle(cfg: &ExperimentConfig, path: Option<&Path>) -> Result<ModelBundle> {
    let default = cfg.out_dir.join("bundle.mcf");
    let path = path.unwrap_or(&default);
    Ok(ModelBundle::load(path)?)
}

/// Training samples of the bundle, normalised; the 1NN reference pool.
fn reference(bundle: &ModelBundle, ds: &Dataset) -> Result<Vec<MotionSample>> {
    ds.samples
        .iter()
        .filter(|s| bundle.normalization.fitted_on.contains(&s.id))
        .map(|s| Ok(bundle.normalization.apply(s)?))
        .collect()
}

struct Explanation {
    bundle: ModelBundle,
    /// Normalised input.
    input: MotionSample,
    result: CFResult,
}

fn explain(cfg: &mut ExperimentConfig, args: &ExplainArgs) -> Result<Explanation> {
    if let Some(t) = args.target.target {
        cfg.cf.target = t;
    }
    let bundle = load_bundle(cfg, args.bundle.as_deref())?;
    let ds = cfg.load_dataset()?;
    let raw = ds
        .find(&args.instance)
        .ok_or_else(|| motioncf::Error::Config(format!("no sample `{}` in the dataset", args.instance)))?;
    let x = bundle.normalization.apply(raw)?;
    let result = match args.method.distance() {
        None => latent_cf(&x.frames, &cfg.cf, &bundle.autoencoder, &bundle.classifier)?,
        Some(d) => nn_cf(
            &x.frames,
            cfg.cf.target,
            d,
            &reference(&bundle, &ds)?,
            &bundle.classifier,
        )?,
    };
    Ok(Explanation {
        bundle,
        input: x,
        result,
    })
}

fn summary(r: &CFResult) -> serde_json::Value {
    json!({
        "method": r.method,
        "target": r.target,
        "valid": r.valid,
        "iterations": r.iterations,
        "final_prob": r.final_prob,
        "neighbor": r.neighbor_id,
        "final_loss": r.loss_trace.last().map(|&(_, l)| l),
    })
}

fn evaluate(cfg: &mut ExperimentConfig, args: &EvaluateArgs) -> Result<()> {
    if let Some(t) = args.target.target {
        cfg.cf.target = t;
    }
    let ds = cfg.load_dataset()?;
    let bundle = match &args.bundle {
        Some(p) => ModelBundle::load(p)?,
        None => train_and_save(cfg, &ds)?,
    };
    let eval = run_cf_evaluation(cfg, &bundle, &ds)?;
    let dir = create_out(cfg)?.join("evaluation");
    eval.write(&dir)?;
    print!("{}", emit_table(&eval.table, TableFormat::Markdown));
    let failed: usize = eval.reports.iter().map(|(_, r)| r.failures.len()).sum();
    if failed > 0 {
        eprintln!(
            "{failed} per-instance failures, see {}",
            dir.join("failures.csv").display()
        );
    }
    Ok(())
}

fn benchmark(cfg: &ExperimentConfig) -> Result<()> {
    let ds = cfg.load_dataset()?;
    let report = run_cv_benchmark(cfg, &ds)?;
    let dir = create_out(cfg)?.join("benchmark");
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let md = emit_table(&report.table, TableFormat::Markdown);
    for (name, text) in [
        ("table.md", md.clone()),
        ("table.csv", emit_table(&report.table, TableFormat::Csv)),
        ("folds.csv", report.fold_csv()),
    ] {
        fs::write(dir.join(name), text).with_context(|| format!("writing {name}"))?;
    }
    print!("{md}");
    Ok(())
}

fn export(cfg: &mut ExperimentConfig, args: &ExportArgs) -> Result<()> {
    let e = explain(cfg, &args.explain)?;
    let path = match &args.file {
        Some(p) => p.clone(),
        None => create_out(cfg)?.join(format!("{}-{}.motion", e.input.id, e.result.method)),
    };
    export_motion(&e.input, &e.result, &e.bundle.normalization, &e.bundle.schema, &path)?;
    println!("wrote {} (valid: {})", path.display(), e.result.valid);
    Ok(())
}
