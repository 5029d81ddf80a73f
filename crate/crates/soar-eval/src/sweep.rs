use std::collections::{BTreeMap, BTreeSet};
use std::io::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use soar_data::{Dataset, OneShotSplit, SkeletonSequence};
use soar_model::Model;
use soar_occlude::{
    builtin_library, estimate_group_calibrations, occlude_random, occlude_realistic_3d,
    occlude_spatial, occlude_temporal, OcclusionConfig,
};

use crate::{
    add_gaussian_noise, classify_one_shot, embed_samples, metrics, EvalError, MatchMetric, Metrics,
};

/// Metrics plus the test-set size they were computed over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub metrics: Metrics,
    pub n_test: usize,
}

/// Per-sample and per-group randomness is keyed by (seed, cell, index) so
/// results never depend on iteration order or on other cells in the grid.
fn stream_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fetch<'a>(
    dataset: &'a Dataset,
    indices: &[usize],
) -> Result<Vec<(&'a SkeletonSequence, u32)>, EvalError> {
    indices
        .iter()
        .map(|&i| {
            dataset
                .samples
                .get(i)
                .map(|s| (s, s.label))
                .ok_or_else(|| EvalError::Data(format!("sample index {i} out of range")))
        })
        .collect()
}

/// Embeds supports and tests through the deployed branch and scores nearest-
/// support predictions.
fn classify_set(
    model: &Model<f32>,
    dataset: &Dataset,
    support: &[(&SkeletonSequence, u32)],
    test: &[(&SkeletonSequence, u32)],
    metric: MatchMetric,
) -> Result<EvalOutcome, EvalError> {
    if support.is_empty() {
        return Err(EvalError::Data("empty support set".into()));
    }
    if test.is_empty() {
        return Err(EvalError::Data("empty test set".into()));
    }
    let topology = &dataset.meta.topology;
    let sup_refs: Vec<&SkeletonSequence> = support.iter().map(|&(s, _)| s).collect();
    let supports: Vec<(Vec<f32>, u32)> = embed_samples(model, &sup_refs, topology)?
        .into_iter()
        .zip(support.iter().map(|&(_, l)| l))
        .collect();
    let test_refs: Vec<&SkeletonSequence> = test.iter().map(|&(s, _)| s).collect();
    let predictions: Vec<u32> = embed_samples(model, &test_refs, topology)?
        .iter()
        .map(|e| classify_one_shot(e, &supports, metric))
        .collect();
    let labels: Vec<u32> = test.iter().map(|&(_, l)| l).collect();
    Ok(EvalOutcome { metrics: metrics(&predictions, &labels), n_test: test.len() })
}

/// Clean one-shot protocol: one support embedding per novel class, every
/// test sample classified by nearest support.
pub fn one_shot_eval(
    model: &Model<f32>,
    dataset: &Dataset,
    split: &OneShotSplit,
    metric: MatchMetric,
) -> Result<EvalOutcome, EvalError> {
    let support = fetch(dataset, &split.support)?;
    let test = fetch(dataset, &split.test)?;
    classify_set(model, dataset, &support, &test, metric)
}

/// One-shot protocol with i.i.d. Gaussian corruption of the unmasked test
/// coordinates (and the support's too when `noise_support` is set) before
/// encoding. sigma = 0, mu = 0 reproduces the clean run exactly.
#[allow(clippy::too_many_arguments)]
pub fn gaussian_noise_eval(
    model: &Model<f32>,
    dataset: &Dataset,
    split: &OneShotSplit,
    sigma: f64,
    mu: f64,
    noise_support: bool,
    seed: u64,
    metric: MatchMetric,
) -> Result<EvalOutcome, EvalError> {
    if sigma < 0.0 {
        return Err(EvalError::Config(format!("sigma {sigma} must be >= 0")));
    }
    let corrupt = |indices: &[usize], tag: u64| -> Result<Vec<SkeletonSequence>, EvalError> {
        let mut out = Vec::with_capacity(indices.len());
        for &i in indices {
            let mut seq = dataset
                .samples
                .get(i)
                .ok_or_else(|| EvalError::Data(format!("sample index {i} out of range")))?
                .clone();
            let mut rng = ChaCha12Rng::seed_from_u64(stream_seed(seed, tag, i as u64));
            add_gaussian_noise(&mut seq, sigma, mu, &mut rng);
            out.push(seq);
        }
        Ok(out)
    };

    let test_seqs = corrupt(&split.test, 0)?;
    let test: Vec<(&SkeletonSequence, u32)> = test_seqs.iter().map(|s| (s, s.label)).collect();
    if noise_support {
        let sup_seqs = corrupt(&split.support, 1)?;
        let support: Vec<(&SkeletonSequence, u32)> =
            sup_seqs.iter().map(|s| (s, s.label)).collect();
        classify_set(model, dataset, &support, &test, metric)
    } else {
        let support = fetch(dataset, &split.support)?;
        classify_set(model, dataset, &support, &test, metric)
    }
}

/// One grid cell's occlusion operator. `None` is the identity (clean
/// baseline); the realistic operator carries its target SNR interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SweepOp {
    None,
    Random { gamma: f64 },
    Temporal { frames: usize },
    Spatial { joints: usize },
    Re3d { snr_min: f64, snr_max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub condition: String,
    pub op: SweepOp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub cells: Vec<SweepCell>,
    /// Occlude the support samples too, not just the test samples.
    #[serde(default)]
    pub occval: bool,
    #[serde(default)]
    pub seed: u64,
}

/// Clean baseline, the three random-occlusion ratios, and the three
/// realistic SNR ranges of the reference evaluation grids.
pub fn standard_sweep() -> Vec<SweepCell> {
    let mut cells = vec![SweepCell { condition: "clean".into(), op: SweepOp::None }];
    for gamma in [0.1, 0.3, 0.5] {
        cells.push(SweepCell {
            condition: format!("ra_{gamma}"),
            op: SweepOp::Random { gamma },
        });
    }
    for snr_max in [0.2, 0.35, 0.5] {
        cells.push(SweepCell {
            condition: format!("re_0.05-{snr_max}"),
            op: SweepOp::Re3d { snr_min: 0.05, snr_max },
        });
    }
    cells
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub condition: String,
    pub metrics: Metrics,
    pub n_test: usize,
}

/// Runs every grid cell: clone the evaluation samples, apply the cell's
/// operator, embed and score. Tests are always occluded; supports only under
/// `occval`. Realistic occlusion works on whole capture groups through
/// calibrations estimated from the clean clones, then only the evaluation
/// members of each group are kept.
pub fn occlusion_sweep(
    model: &Model<f32>,
    dataset: &Dataset,
    split: &OneShotSplit,
    config: &SweepConfig,
    metric: MatchMetric,
) -> Result<Vec<SweepRow>, EvalError> {
    if config.cells.is_empty() {
        return Err(EvalError::Config("sweep grid has no cells".into()));
    }
    for cell in &config.cells {
        if cell.condition.is_empty() || cell.condition.contains(',') {
            return Err(EvalError::Config(format!(
                "condition name {:?} must be non-empty and comma-free",
                cell.condition
            )));
        }
    }

    let mut targets: BTreeSet<usize> = split.test.iter().copied().collect();
    if config.occval {
        targets.extend(&split.support);
    }
    for &i in targets.iter().chain(&split.support) {
        if i >= dataset.samples.len() {
            return Err(EvalError::Data(format!("sample index {i} out of range")));
        }
    }

    let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, s) in dataset.samples.iter().enumerate() {
        groups.entry(s.group_id).or_default().push(i);
    }
    let occluders = builtin_library(config.seed);

    let mut rows = Vec::with_capacity(config.cells.len());
    for (ci, cell) in config.cells.iter().enumerate() {
        let ci = ci as u64;
        let mut cloned: BTreeMap<usize, SkeletonSequence> =
            targets.iter().map(|&i| (i, dataset.samples[i].clone())).collect();

        match cell.op {
            SweepOp::None => {}
            SweepOp::Random { gamma } => {
                for (&i, seq) in cloned.iter_mut() {
                    let mut rng =
                        ChaCha12Rng::seed_from_u64(stream_seed(config.seed, ci, i as u64));
                    occlude_random(seq, gamma, &mut rng)?;
                }
            }
            SweepOp::Temporal { frames } => {
                for (&i, seq) in cloned.iter_mut() {
                    let mut rng =
                        ChaCha12Rng::seed_from_u64(stream_seed(config.seed, ci, i as u64));
                    occlude_temporal(seq, frames, &mut rng)?;
                }
            }
            SweepOp::Spatial { joints } => {
                for (&i, seq) in cloned.iter_mut() {
                    let mut rng =
                        ChaCha12Rng::seed_from_u64(stream_seed(config.seed, ci, i as u64));
                    occlude_spatial(seq, joints, &mut rng)?;
                }
            }
            SweepOp::Re3d { snr_min, snr_max } => {
                let occ = OcclusionConfig {
                    snr_range: [snr_min, snr_max],
                    ..OcclusionConfig::default()
                };
                let gids: BTreeSet<u32> =
                    targets.iter().map(|&i| dataset.samples[i].group_id).collect();
                for gid in gids {
                    let members = &groups[&gid];
                    let mut group: Vec<SkeletonSequence> =
                        members.iter().map(|&i| dataset.samples[i].clone()).collect();
                    let refs: Vec<&SkeletonSequence> = group.iter().collect();
                    let cals = estimate_group_calibrations(&refs)?;
                    let mut rng =
                        ChaCha12Rng::seed_from_u64(stream_seed(config.seed, ci, gid as u64));
                    occlude_realistic_3d(&mut group, &cals, &occluders, &occ, &mut rng)?;
                    for (seq, &i) in group.into_iter().zip(members) {
                        if targets.contains(&i) {
                            cloned.insert(i, seq);
                        }
                    }
                }
            }
        }

        let test: Vec<(&SkeletonSequence, u32)> =
            split.test.iter().map(|&i| (&cloned[&i], cloned[&i].label)).collect();
        let outcome = if config.occval {
            let support: Vec<(&SkeletonSequence, u32)> =
                split.support.iter().map(|&i| (&cloned[&i], cloned[&i].label)).collect();
            classify_set(model, dataset, &support, &test, metric)?
        } else {
            let support = fetch(dataset, &split.support)?;
            classify_set(model, dataset, &support, &test, metric)?
        };
        rows.push(SweepRow {
            condition: cell.condition.clone(),
            metrics: outcome.metrics,
            n_test: outcome.n_test,
        });
    }
    Ok(rows)
}

pub fn write_metrics_csv(rows: &[SweepRow], path: &Path) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "condition,accuracy,f1,precision,recall,n_test")?;
    for r in rows {
        writeln!(
            f,
            "{},{},{},{},{},{}",
            r.condition, r.metrics.accuracy, r.metrics.f1, r.metrics.precision, r.metrics.recall,
            r.n_test
        )?;
    }
    Ok(())
}
