//! Pipeline driver: synthesize multi-view skeleton datasets, occlude them,
//! train the three-stream recognition model, and run one-shot evaluation
//! with noise and occlusion robustness sweeps.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric error.

mod error;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use soar_data::{
    load_dataset, make_one_shot_split, save_dataset, Dataset, OneShotSplit, SkeletonSequence,
    SynthConfig,
};
use soar_eval::{
    gaussian_noise_eval, occlusion_sweep, one_shot_eval, write_metrics_csv, MatchMetric,
    SweepConfig, SweepRow,
};
use soar_model::{load_checkpoint, save_checkpoint, Model, ModelConfig};
use soar_occlude::{
    builtin_library, estimate_group_calibrations, load_occluder, occlude_random,
    occlude_realistic_2d, occlude_realistic_3d, occlude_spatial, occlude_temporal, snr_histogram,
    snr_of, OccluderModel, OcclusionConfig,
};
use soar_train::{write_log_csv, TrainConfig};

use error::CliError;

#[derive(Parser)]
#[command(
    name = "soar",
    about = "Occluded skeleton-sequence synthesis, training and one-shot evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-view motion dataset.
    Synth {
        #[arg(long)]
        classes: usize,
        /// Instances per class; each instance is captured by every camera.
        #[arg(long)]
        per_class: usize,
        #[arg(long, default_value_t = 1)]
        cameras: usize,
        #[arg(long, default_value_t = 30)]
        frames: usize,
        #[arg(long, default_value_t = 17)]
        joints: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output dataset directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply one occlusion operator to every sample of a dataset.
    Occlude {
        /// Input dataset directory.
        #[arg(long = "in")]
        input: PathBuf,
        /// Output dataset directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        mode: OccludeMode,
        /// Lower SNR bound (re3d only).
        #[arg(long)]
        snr_min: Option<f64>,
        /// Upper SNR bound (re3d only).
        #[arg(long)]
        snr_max: Option<f64>,
        /// Masked-cell ratio (random mode only).
        #[arg(long)]
        gamma: Option<f64>,
        /// Frames to drop per sample (temporal mode only).
        #[arg(long)]
        frames: Option<usize>,
        /// Joints to drop per frame (spatial mode only).
        #[arg(long)]
        joints: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory of occluder mesh files (re3d/re2d); built-in library
        /// when omitted.
        #[arg(long)]
        occluders: Option<PathBuf>,
        /// Optional per-sample SNR CSV.
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Train the recognition model on the base classes of a dataset.
    Train {
        /// Dataset directory.
        #[arg(long)]
        data: PathBuf,
        /// Model configuration JSON.
        #[arg(long)]
        config: PathBuf,
        /// Training manifest JSON: base/novel classes plus optimizer
        /// settings.
        #[arg(long)]
        train_config: PathBuf,
        /// Checkpoint output directory.
        #[arg(long)]
        out: PathBuf,
        /// Optional per-epoch loss CSV.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// One-shot evaluation of a trained checkpoint.
    Eval {
        /// Dataset directory (must index-match the training dataset).
        #[arg(long)]
        data: PathBuf,
        /// Checkpoint directory produced by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Gaussian noise level applied to the test samples before encoding.
        #[arg(long)]
        noise_sigma: Option<f64>,
        /// Corrupt the support samples too, not just the test samples.
        #[arg(long)]
        occval: Option<bool>,
        /// Occlusion sweep grid JSON; runs every cell and reports one row
        /// each.
        #[arg(long)]
        sweep: Option<PathBuf>,
        /// Output metrics CSV.
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Corruption seed; overrides the sweep grid's seed when set.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = MetricArg::Cosine)]
        match_metric: MetricArg,
    },
    /// Mask-SNR histogram of a dataset.
    Stats {
        /// Dataset directory.
        #[arg(long)]
        data: PathBuf,
        /// Number of equal-width bins over [0, 1].
        #[arg(long, default_value_t = 20)]
        bins: usize,
        /// Output histogram CSV.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OccludeMode {
    Re3d,
    Re2d,
    Random,
    Temporal,
    Spatial,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    Cosine,
    Euclidean,
}

impl From<MetricArg> for MatchMetric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Cosine => MatchMetric::Cosine,
            MetricArg::Euclidean => MatchMetric::Euclidean,
        }
    }
}

/// Experiment manifest for `train`: the one-shot class split plus the
/// optimizer configuration.
#[derive(Debug, Serialize, Deserialize)]
struct TrainManifest {
    base_classes: Vec<u32>,
    novel_classes: Vec<u32>,
    #[serde(default)]
    support_seed: u64,
    #[serde(default)]
    train: TrainConfig,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests land here too; only real parse
            // failures are usage errors.
            let code = i32::from(e.use_stderr());
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli.command) {
        eprintln!("error: {}", e.message());
        std::process::exit(e.exit_code());
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Synth { classes, per_class, cameras, frames, joints, seed, out } => {
            run_synth(classes, per_class, cameras, frames, joints, seed, &out)
        }
        Command::Occlude {
            input,
            out,
            mode,
            snr_min,
            snr_max,
            gamma,
            frames,
            joints,
            seed,
            occluders,
            stats,
        } => {
            let flags = OccludeFlags {
                mode,
                snr_min,
                snr_max,
                gamma,
                frames,
                joints,
                seed,
                occluders,
                stats,
            };
            run_occlude(&input, &out, &flags)
        }
        Command::Train { data, config, train_config, out, log } => {
            run_train(&data, &config, &train_config, &out, log.as_deref())
        }
        Command::Eval {
            data,
            checkpoint,
            noise_sigma,
            occval,
            sweep,
            metrics,
            seed,
            match_metric,
        } => run_eval(
            &data,
            &checkpoint,
            noise_sigma,
            occval,
            sweep.as_deref(),
            metrics.as_deref(),
            seed,
            match_metric.into(),
        ),
        Command::Stats { data, bins, out } => run_stats(&data, bins, &out),
    }
}

/// Same splitmix-style separation the library crates use: one independent
/// stream per sample or group, insensitive to processing order.
fn stream_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn run_synth(
    classes: usize,
    per_class: usize,
    cameras: usize,
    frames: usize,
    joints: usize,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let synth = soar_data::synth_dataset(&SynthConfig {
        classes,
        samples_per_class: per_class,
        cameras,
        frames,
        joints,
        seed,
    })?;
    save_dataset(&synth.dataset, out)?;
    println!(
        "wrote {} samples ({classes} classes x {per_class} instances x {cameras} cameras) to {}",
        synth.dataset.samples.len(),
        out.display()
    );
    Ok(())
}

struct OccludeFlags {
    mode: OccludeMode,
    snr_min: Option<f64>,
    snr_max: Option<f64>,
    gamma: Option<f64>,
    frames: Option<usize>,
    joints: Option<usize>,
    seed: u64,
    occluders: Option<PathBuf>,
    stats: Option<PathBuf>,
}

fn require<T>(v: Option<T>, name: &str, mode: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Usage(format!("--{name} is required for mode {mode}")))
}

fn forbid<T>(v: &Option<T>, name: &str, mode: &str) -> Result<(), CliError> {
    match v {
        Some(_) => Err(CliError::Usage(format!("--{name} has no effect in mode {mode}"))),
        None => Ok(()),
    }
}

fn load_occluder_dir(dir: &Path) -> Result<Vec<OccluderModel>, CliError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    let mut models = Vec::with_capacity(paths.len());
    for p in &paths {
        models.push(load_occluder(p)?);
    }
    if models.is_empty() {
        return Err(CliError::Usage(format!("no occluder files in {}", dir.display())));
    }
    Ok(models)
}

fn run_occlude(input: &Path, out: &Path, flags: &OccludeFlags) -> Result<(), CliError> {
    let mut ds = load_dataset(input)?;
    let seed = flags.seed;
    match flags.mode {
        OccludeMode::Random => {
            let gamma = require(flags.gamma, "gamma", "random")?;
            forbid(&flags.snr_min, "snr-min", "random")?;
            forbid(&flags.snr_max, "snr-max", "random")?;
            forbid(&flags.frames, "frames", "random")?;
            forbid(&flags.joints, "joints", "random")?;
            forbid(&flags.occluders, "occluders", "random")?;
            for (i, s) in ds.samples.iter_mut().enumerate() {
                let mut rng = ChaCha12Rng::seed_from_u64(stream_seed(seed, i as u64));
                occlude_random(s, gamma, &mut rng)?;
            }
        }
        OccludeMode::Temporal => {
            let frames = require(flags.frames, "frames", "temporal")?;
            forbid(&flags.snr_min, "snr-min", "temporal")?;
            forbid(&flags.snr_max, "snr-max", "temporal")?;
            forbid(&flags.gamma, "gamma", "temporal")?;
            forbid(&flags.joints, "joints", "temporal")?;
            forbid(&flags.occluders, "occluders", "temporal")?;
            for (i, s) in ds.samples.iter_mut().enumerate() {
                let mut rng = ChaCha12Rng::seed_from_u64(stream_seed(seed, i as u64));
                occlude_temporal(s, frames, &mut rng)?;
            }
        }
        OccludeMode::Spatial => {
            let joints = require(flags.joints, "joints", "spatial")?;
            forbid(&flags.snr_min, "snr-min", "spatial")?;
            forbid(&flags.snr_max, "snr-max", "spatial")?;
            forbid(&flags.gamma, "gamma", "spatial")?;
            forbid(&flags.frames, "frames", "spatial")?;
            forbid(&flags.occluders, "occluders", "spatial")?;
            for (i, s) in ds.samples.iter_mut().enumerate() {
                let mut rng = ChaCha12Rng::seed_from_u64(stream_seed(seed, i as u64));
                occlude_spatial(s, joints, &mut rng)?;
            }
        }
        OccludeMode::Re3d => {
            forbid(&flags.gamma, "gamma", "re3d")?;
            forbid(&flags.frames, "frames", "re3d")?;
            forbid(&flags.joints, "joints", "re3d")?;
            let defaults = OcclusionConfig::default();
            let occ = OcclusionConfig {
                snr_range: [
                    flags.snr_min.unwrap_or(defaults.snr_range[0]),
                    flags.snr_max.unwrap_or(defaults.snr_range[1]),
                ],
                seed,
                ..defaults
            };
            let library = match &flags.occluders {
                Some(dir) => load_occluder_dir(dir)?,
                None => builtin_library(seed),
            };
            for group in ds.group_indices() {
                let mut members: Vec<SkeletonSequence> =
                    group.iter().map(|&i| ds.samples[i].clone()).collect();
                let refs: Vec<&SkeletonSequence> = members.iter().collect();
                let cals = estimate_group_calibrations(&refs)?;
                let gid = ds.samples[group[0]].group_id;
                let mut rng = ChaCha12Rng::seed_from_u64(stream_seed(seed, gid as u64));
                occlude_realistic_3d(&mut members, &cals, &library, &occ, &mut rng)?;
                for (m, &i) in members.into_iter().zip(&group) {
                    ds.samples[i] = m;
                }
            }
        }
        OccludeMode::Re2d => {
            forbid(&flags.snr_min, "snr-min", "re2d")?;
            forbid(&flags.snr_max, "snr-max", "re2d")?;
            forbid(&flags.gamma, "gamma", "re2d")?;
            forbid(&flags.frames, "frames", "re2d")?;
            forbid(&flags.joints, "joints", "re2d")?;
            let library = match &flags.occluders {
                Some(dir) => load_occluder_dir(dir)?,
                None => builtin_library(seed),
            };
            for i in 0..ds.samples.len() {
                let mut rng = ChaCha12Rng::seed_from_u64(stream_seed(seed, i as u64));
                let pick = rng.gen_range(0..library.len());
                occlude_realistic_2d(&mut ds.samples[i], &library[pick], &mut rng)?;
            }
        }
    }
    save_dataset(&ds, out)?;
    if let Some(stats_path) = &flags.stats {
        let mut f = fs::File::create(stats_path)?;
        writeln!(f, "sample,snr")?;
        for (i, s) in ds.samples.iter().enumerate() {
            writeln!(f, "{i},{}", snr_of(&s.mask))?;
        }
    }
    println!("occluded {} samples to {}", ds.samples.len(), out.display());
    Ok(())
}

fn run_train(
    data: &Path,
    config: &Path,
    train_config: &Path,
    out: &Path,
    log: Option<&Path>,
) -> Result<(), CliError> {
    let ds = load_dataset(data)?;
    let model_cfg: ModelConfig = serde_json::from_slice(&fs::read(config)?)?;
    let manifest: TrainManifest = serde_json::from_slice(&fs::read(train_config)?)?;
    let split = make_one_shot_split(
        &ds,
        &manifest.base_classes,
        &manifest.novel_classes,
        manifest.support_seed,
    )?;
    let mut model = Model::<f32>::init(model_cfg, manifest.train.seed)?;
    let outcome = soar_train::train(&mut model, &ds, &split, &manifest.train, Some(out))?;
    save_checkpoint(&model, out)?;
    fs::write(out.join("split.json"), serde_json::to_vec_pretty(&split)?)?;
    fs::write(out.join("train.json"), serde_json::to_vec_pretty(&manifest.train)?)?;
    if let Some(log_path) = log {
        write_log_csv(&outcome.log, log_path)?;
    }
    let last = outcome.log.epochs.last().expect("at least one epoch");
    println!(
        "trained {} epochs; final loss {} (tpl {} cls {} lsc {})",
        outcome.log.epochs.len(),
        last.total,
        last.l_tpl,
        last.l_cls,
        last.l_lsc
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_eval(
    data: &Path,
    checkpoint: &Path,
    noise_sigma: Option<f64>,
    occval: Option<bool>,
    sweep: Option<&Path>,
    metrics_path: Option<&Path>,
    seed: Option<u64>,
    metric: MatchMetric,
) -> Result<(), CliError> {
    let ds = load_dataset(data)?;
    let model: Model<f32> = load_checkpoint(checkpoint)?;
    let split_raw = fs::read(checkpoint.join("split.json"))?;
    let split: OneShotSplit = serde_json::from_slice(&split_raw)
        .map_err(|e| CliError::Data(format!("bad split.json in checkpoint: {e}")))?;

    let rows: Vec<SweepRow> = if let Some(grid_path) = sweep {
        if noise_sigma.is_some() {
            return Err(CliError::Usage(
                "--noise-sigma and --sweep are mutually exclusive".into(),
            ));
        }
        let mut grid: SweepConfig = serde_json::from_slice(&fs::read(grid_path)?)?;
        if let Some(v) = occval {
            grid.occval = v;
        }
        if let Some(s) = seed {
            grid.seed = s;
        }
        occlusion_sweep(&model, &ds, &split, &grid, metric)?
    } else if let Some(sigma) = noise_sigma {
        let out = gaussian_noise_eval(
            &model,
            &ds,
            &split,
            sigma,
            0.0,
            occval.unwrap_or(false),
            seed.unwrap_or(0),
            metric,
        )?;
        vec![SweepRow { condition: format!("noise_{sigma}"), metrics: out.metrics, n_test: out.n_test }]
    } else {
        if occval.is_some() {
            return Err(CliError::Usage(
                "--occval has no effect without --sweep or --noise-sigma".into(),
            ));
        }
        let out = one_shot_eval(&model, &ds, &split, metric)?;
        vec![SweepRow { condition: "clean".into(), metrics: out.metrics, n_test: out.n_test }]
    };

    for r in &rows {
        println!(
            "{} accuracy={} f1={} precision={} recall={} n_test={}",
            r.condition,
            r.metrics.accuracy,
            r.metrics.f1,
            r.metrics.precision,
            r.metrics.recall,
            r.n_test
        );
    }
    if let Some(p) = metrics_path {
        write_metrics_csv(&rows, p)?;
    }
    Ok(())
}

fn run_stats(data: &Path, bins: usize, out: &Path) -> Result<(), CliError> {
    if bins == 0 {
        return Err(CliError::Usage("--bins must be >= 1".into()));
    }
    let ds: Dataset = load_dataset(data)?;
    let edges: Vec<f64> = (0..=bins).map(|i| i as f64 / bins as f64).collect();
    let counts = snr_histogram(&ds, &edges)?;
    let mut f = fs::File::create(out)?;
    writeln!(f, "bin_lo,bin_hi,count")?;
    for (i, c) in counts.iter().enumerate() {
        writeln!(f, "{},{},{c}", edges[i], edges[i + 1])?;
    }
    println!("wrote {bins}-bin SNR histogram over {} samples to {}", ds.samples.len(), out.display());
    Ok(())
}
