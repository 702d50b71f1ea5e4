//! Command-line entry point: training, evaluation, frequency-response
//! export, and depth sweeps over TSV datasets.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use adagnn::analysis::{export_response, oversmooth_sweep, write_response_csv, write_sweep_csv};
use adagnn::data::{load_dataset, planetoid_split, random_split};
use adagnn::model::{load_checkpoint, save_checkpoint, Checkpoint, ModelKind, ModelParams, ParamSet};
use adagnn::optim::{masked_accuracy, predict, train, write_history_csv, TrainConfig};
use adagnn::Dataset;

#[derive(Parser)]
#[command(name = "adagnn", version, about = "Adaptive spectral graph filters for node classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write manifest, checkpoint, and history CSV.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Export per-channel frequency-response curves to CSV.
    Response(ResponseArgs),
    /// Train every (model, depth, seed) combination and tabulate accuracy.
    Sweep(SweepArgs),
}

#[derive(Args, Clone)]
struct CommonTrainOpts {
    /// Learning rate.
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    /// Maximum number of epochs.
    #[arg(long, default_value_t = 300)]
    epochs: usize,
    /// Dropout rate in [0, 1).
    #[arg(long, default_value_t = 0.5)]
    dropout: f64,
    /// ℓ1 weight on the filter coefficients.
    #[arg(long, default_value_t = 1e-6)]
    alpha: f64,
    /// ℓ2 weight on all trainable parameters.
    #[arg(long, default_value_t = 9e-4)]
    beta: f64,
    /// Early-stopping patience in epochs.
    #[arg(long, default_value_t = 30)]
    patience: usize,
    /// RNG seed controlling initialization, dropout, and random splits.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also apply dropout inside the parameter-free layers.
    #[arg(long, default_value_t = false)]
    dropout_intermediate: bool,
    /// Divide each feature row by its sum before training.
    #[arg(long, default_value_t = false)]
    row_normalize: bool,
    /// Split selection: `file`, `planetoid`, or `random:<train>,<val>`.
    #[arg(long, default_value = "planetoid")]
    split: String,
}

impl CommonTrainOpts {
    fn to_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            max_epochs: self.epochs,
            dropout: self.dropout,
            alpha: self.alpha,
            beta: self.beta,
            patience: self.patience,
            seed: self.seed,
            dropout_intermediate: self.dropout_intermediate,
            ..TrainConfig::default()
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset directory with edges.tsv / features.tsv / labels.tsv.
    #[arg(long)]
    data: PathBuf,
    /// Model kind: adagnn-s, adagnn-r, gcn, or sgc.
    #[arg(long, default_value = "adagnn-s")]
    model: String,
    /// Number of filter layers K.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..))]
    layers: u32,
    /// Hidden width.
    #[arg(long, default_value_t = 128)]
    hidden: usize,
    #[command(flatten)]
    common: CommonTrainOpts,
    /// Output directory for manifest.json, model.ckpt, history.csv.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Split selection: `file`, `planetoid`, or `random:<train>,<val>`.
    #[arg(long, default_value = "planetoid")]
    split: String,
    #[arg(long, default_value_t = false)]
    row_normalize: bool,
    /// Seed for `random:` splits.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ResponseArgs {
    /// Checkpoint of a trained adaptive-filter model.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Depth of the untrained reference model when no checkpoint is given.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..))]
    layers: u32,
    /// Comma-separated channel indices; defaults to the first 8.
    #[arg(long)]
    channels: Option<String>,
    /// Grid resolution over λ ∈ [0, 2].
    #[arg(long, default_value_t = 201)]
    grid_points: usize,
    /// Output CSV path.
    #[arg(long, default_value = "response.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated model kinds.
    #[arg(long, default_value = "gcn,adagnn-s")]
    models: String,
    /// Comma-separated depths.
    #[arg(long, default_value = "2,4,8,16")]
    depths: String,
    /// Comma-separated seeds.
    #[arg(long, default_value = "0,1,2")]
    seeds: String,
    #[arg(long, default_value_t = 128)]
    hidden: usize,
    #[command(flatten)]
    common: CommonTrainOpts,
    /// Output directory for sweep.csv.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Serialize)]
struct ResolvedConfig {
    lr: f64,
    epochs: usize,
    dropout: f64,
    alpha: f64,
    beta: f64,
    patience: usize,
    seed: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    dropout_intermediate: bool,
}

#[derive(Serialize)]
struct RunManifest {
    tool_version: &'static str,
    command: &'static str,
    model: String,
    layers: usize,
    hidden: usize,
    data_dir: String,
    dataset_fingerprint: String,
    split: String,
    row_normalize: bool,
    out_dir: String,
    config: ResolvedConfig,
    config_hash: String,
}

fn main() -> Result<()> {
    init_thread_pool();
    match Cli::parse().command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Response(args) => cmd_response(args),
        Command::Sweep(args) => cmd_sweep(args),
    }
}

/// `ADAGNN_THREADS` caps internal parallelism; default is all cores.
fn init_thread_pool() {
    if let Ok(v) = std::env::var("ADAGNN_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let kind = ModelKind::parse(&args.model)?;
    let cfg = args.common.to_config();
    let ds = load_and_split(&args.data, &args.common.split, args.common.row_normalize, cfg.seed)?;
    let layers = args.layers as usize;

    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating output dir {}", args.out.display()))?;
    let fingerprint = dataset_fingerprint(&args.data)?;
    let config = ResolvedConfig {
        lr: cfg.lr,
        epochs: cfg.max_epochs,
        dropout: cfg.dropout,
        alpha: cfg.alpha,
        beta: cfg.beta,
        patience: cfg.patience,
        seed: cfg.seed,
        beta1: cfg.beta1,
        beta2: cfg.beta2,
        eps: cfg.eps,
        dropout_intermediate: cfg.dropout_intermediate,
    };
    let mut manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        command: "train",
        model: kind.to_string(),
        layers,
        hidden: args.hidden,
        data_dir: args.data.display().to_string(),
        dataset_fingerprint: fingerprint,
        split: args.common.split.clone(),
        row_normalize: args.common.row_normalize,
        out_dir: args.out.display().to_string(),
        config,
        config_hash: String::new(),
    };
    let config_hash = manifest_hash(&manifest)?;
    manifest.config_hash = format!("sha256:{}", hex(&config_hash));
    fs::write(
        args.out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;

    let outcome = train(kind, &ds, layers, args.hidden, &cfg)?;
    write_history_csv(&args.out.join("history.csv"), &outcome.history)?;
    save_checkpoint(
        &args.out.join("model.ckpt"),
        &Checkpoint {
            kind,
            k_layers: layers,
            in_dim: ds.n_features(),
            hidden: args.hidden,
            classes: ds.n_classes,
            seed: cfg.seed,
            config_hash,
            params: outcome.params.clone(),
        },
    )?;

    let yhat = predict(kind, &outcome.params, &ds)?;
    let val_acc = masked_accuracy(&yhat, &ds.y, &ds.val_mask);
    let test_acc = masked_accuracy(&yhat, &ds.y, &ds.test_mask);
    println!(
        "trained {kind} K={layers} for {} epochs (best epoch {})",
        outcome.history.len(),
        outcome.best_epoch
    );
    println!("val_acc={val_acc}");
    println!("test_acc={test_acc}");
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let ds = load_and_split(&args.data, &args.split, args.row_normalize, args.seed)?;
    if ckpt.in_dim != ds.n_features() {
        bail!(
            "feature dimension mismatch: checkpoint has {}, dataset has {}",
            ckpt.in_dim,
            ds.n_features()
        );
    }
    if ckpt.classes != ds.n_classes {
        bail!(
            "class count mismatch: checkpoint has {}, dataset has {}",
            ckpt.classes,
            ds.n_classes
        );
    }
    let yhat = predict(ckpt.kind, &ckpt.params, &ds)?;
    println!(
        "train_acc={}",
        masked_accuracy(&yhat, &ds.y, &ds.train_mask)
    );
    println!("val_acc={}", masked_accuracy(&yhat, &ds.y, &ds.val_mask));
    println!("test_acc={}", masked_accuracy(&yhat, &ds.y, &ds.test_mask));
    Ok(())
}

fn cmd_response(args: ResponseArgs) -> Result<()> {
    let params: ModelParams = match &args.checkpoint {
        Some(path) => {
            let ckpt = load_checkpoint(path)?;
            match ckpt.params {
                ParamSet::Adagnn(p) => p,
                _ => bail!("response curves need an adaptive-filter checkpoint, got {}", ckpt.kind),
            }
        }
        None => {
            // Untrained model: every coefficient is 1, so every channel's
            // curve coincides with the SGC reference.
            let channels = parse_channel_count(&args.channels)?;
            ModelParams::init(args.layers as usize, channels, channels, 1, 0)
        }
    };
    let channels: Vec<usize> = match &args.channels {
        Some(list) => parse_usize_list(list)?,
        None => {
            let available = params.phi.iter().map(|p| p.len()).min().unwrap_or(0);
            (0..available.min(8)).collect()
        }
    };
    let curves = export_response(&params, &channels, args.grid_points)?;
    write_response_csv(&curves, &args.out)?;
    println!(
        "wrote {} curves x {} grid points to {}",
        curves.len(),
        args.grid_points,
        args.out.display()
    );
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let cfg = args.common.to_config();
    let ds = load_and_split(&args.data, &args.common.split, args.common.row_normalize, cfg.seed)?;
    let kinds = args
        .models
        .split(',')
        .map(|s| ModelKind::parse(s.trim()))
        .collect::<adagnn::Result<Vec<_>>>()?;
    let depths = parse_usize_list(&args.depths)?;
    let seeds: Vec<u64> = args
        .seeds
        .split(',')
        .map(|s| s.trim().parse::<u64>().context("bad seed"))
        .collect::<Result<_>>()?;

    fs::create_dir_all(&args.out)?;
    let result = oversmooth_sweep(&ds, &kinds, &depths, &seeds, args.hidden, &cfg)?;
    write_sweep_csv(&result, &args.out.join("sweep.csv"))?;
    for ((kind, depth), (mean, std)) in result.summarize() {
        println!("{kind} K={depth}: test_acc {mean:.4} ± {std:.4}");
    }
    for (kind, depth, seed, err) in &result.failures {
        eprintln!("warning: {kind} K={depth} seed={seed} failed: {err}");
    }
    println!("wrote {}", args.out.join("sweep.csv").display());
    Ok(())
}

fn load_and_split(data: &Path, split: &str, row_normalize: bool, seed: u64) -> Result<Dataset> {
    let ds = load_dataset(data)?;
    let mut ds = apply_split(&ds, split, seed)?;
    if row_normalize {
        ds.row_normalize();
    }
    if let Err(e) = ds.validate() {
        bail!("invalid dataset after split: {e}");
    }
    Ok(ds)
}

fn apply_split(ds: &Dataset, split: &str, seed: u64) -> Result<Dataset> {
    match split {
        "file" => {
            if !ds.has_split() {
                bail!("--split file requires a split.tsv in the dataset directory");
            }
            Ok(ds.clone())
        }
        "planetoid" => Ok(planetoid_split(ds, 20, 500, 1000)?),
        other => {
            let Some(fracs) = other.strip_prefix("random:") else {
                bail!("unknown split `{other}`; expected file, planetoid, or random:<t>,<v>");
            };
            let parts: Vec<&str> = fracs.split(',').collect();
            if parts.len() != 2 {
                bail!("random split needs two fractions, e.g. random:0.1,0.2");
            }
            let ft: f64 = parts[0].trim().parse().context("bad train fraction")?;
            let fv: f64 = parts[1].trim().parse().context("bad val fraction")?;
            Ok(random_split(ds, (ft, fv), seed)?)
        }
    }
}

/// Content hash over the dataset files, in a fixed file order.
fn dataset_fingerprint(dir: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    for name in ["edges.tsv", "features.tsv", "labels.tsv", "split.tsv"] {
        let path = dir.join(name);
        if path.exists() {
            hasher.update(name.as_bytes());
            hasher.update([0u8]);
            hasher.update(fs::read(&path)?);
        }
    }
    Ok(format!("sha256:{}", hex(&hasher.finalize())))
}

fn manifest_hash(manifest: &RunManifest) -> Result<[u8; 32]> {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_string(manifest)?.as_bytes());
    Ok(hasher.finalize().into())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn parse_usize_list(list: &str) -> Result<Vec<usize>> {
    list.split(',')
        .map(|s| s.trim().parse::<usize>().context("bad integer list"))
        .collect()
}

fn parse_channel_count(channels: &Option<String>) -> Result<usize> {
    match channels {
        None => Ok(8),
        Some(list) => {
            let parsed = parse_usize_list(list)?;
            Ok(parsed.iter().max().map(|m| m + 1).unwrap_or(8))
        }
    }
}
