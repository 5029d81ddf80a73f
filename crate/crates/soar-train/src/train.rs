use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use soar_data::{Dataset, OneShotSplit};
use soar_grad::{concat, Graph, Scalar, Tensor};
use soar_model::{encode_sample, save_checkpoint, EncodedSample, Forward, Model};

use crate::{
    augment_features, cosine_lr, cross_entropy, lsc_loss, mine_triplets, mine_triplets_hard,
    phase_for, triplet_margin_loss, AdamW, AugmentParams, Phase, PrototypeMemoryBank,
    PrototypeSource, TrainConfig, TrainError,
};

/// One epoch of the run: batch-size-weighted means of the loss components
/// and the schedule values they were produced under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub l_tpl: f64,
    pub l_cls: f64,
    pub l_lsc: f64,
    pub total: f64,
    pub phase: String,
    pub lr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
}

pub fn write_log_csv(log: &TrainLog, path: &Path) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "epoch,l_tpl,l_cls,l_lsc,total,phase,lr")?;
    for e in &log.epochs {
        writeln!(
            f,
            "{},{},{},{},{},{},{}",
            e.epoch, e.l_tpl, e.l_cls, e.l_lsc, e.total, e.phase, e.lr
        )?;
    }
    Ok(())
}

/// Everything train() leaves behind besides the mutated model.
pub struct TrainOutcome {
    pub log: TrainLog,
    pub bank: PrototypeMemoryBank,
}

/// Distinct deterministic streams per (epoch, batch) purpose.
const STREAM_SHUFFLE: u64 = 1;
const STREAM_DROP_PATH: u64 = 2;
const STREAM_MINE: u64 = 3;

fn stream_seed(seed: u64, tag: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(a.wrapping_mul(0xBF58_476D_1CE4_E5B9))
        .wrapping_add(b.wrapping_mul(0x94D0_49BB_1331_11EB));
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Loss tensors and their scalar readings for one batch.
pub struct BatchLoss<S: Scalar> {
    pub total: Tensor<S>,
    pub tpl: f64,
    pub cls: f64,
    pub lsc: f64,
}

/// Forwards every sample of the batch through both branches on one shared
/// graph and assembles the weighted loss. Public so oracles can exercise
/// the exact production composition at f64.
pub fn batch_loss<S: Scalar>(
    fwd: &Forward<S>,
    graph: &Graph<S>,
    aug_params: &AugmentParams<S>,
    batch: &[(&EncodedSample, u32, usize)],
    mid_width: usize,
    phase: Phase,
    epoch: usize,
    bank: &mut PrototypeMemoryBank,
    config: &TrainConfig,
    mine_rng: &mut ChaCha12Rng,
) -> Result<BatchLoss<S>, TrainError> {
    assert!(!batch.is_empty());
    let mut emb_main = Vec::with_capacity(batch.len());
    let mut emb_aux = Vec::with_capacity(batch.len());
    let mut logit_rows = Vec::with_capacity(batch.len());
    let mut labels = Vec::with_capacity(batch.len());
    let mut class_indices = Vec::with_capacity(batch.len());

    for &(enc, label, class_index) in batch {
        let source = PrototypeSource::for_phase(graph, phase, label, epoch, bank, mid_width)?;
        let augment =
            |tokens: &Tensor<S>| augment_features(aug_params, tokens, &source.materialize(tokens));
        let out = fwd.train_pass(enc, &augment);
        emb_main.push(out.main.embedding);
        emb_aux.push(out.embedding_aux);
        logit_rows.push(out.main.logits);
        labels.push(label);
        class_indices.push(class_index);
    }

    let triplets = if config.hard_mining {
        let coords: Vec<Vec<f64>> = emb_main
            .iter()
            .map(|e| e.values().iter().map(|&v| Scalar::to_f64(v)).collect())
            .collect();
        mine_triplets_hard(&coords, &labels, config.eps)
    } else {
        mine_triplets(&labels, mine_rng)
    };
    let tpl = if triplets.is_empty() {
        None
    } else {
        let anchors: Vec<_> = triplets.iter().map(|&(a, _, _)| emb_main[a].clone()).collect();
        let positives: Vec<_> = triplets.iter().map(|&(_, p, _)| emb_main[p].clone()).collect();
        let negatives: Vec<_> = triplets.iter().map(|&(_, _, n)| emb_main[n].clone()).collect();
        Some(triplet_margin_loss(&anchors, &positives, &negatives, config.margin, config.eps))
    };

    let cls = cross_entropy(&concat(&logit_rows, 0), &class_indices);

    let mut lsc_sum: Option<Tensor<S>> = None;
    for (e, e_star) in emb_main.iter().zip(&emb_aux) {
        let term = lsc_loss(e, e_star);
        lsc_sum = Some(match lsc_sum {
            Some(t) => t.add(&term),
            None => term,
        });
    }
    let lsc = lsc_sum.unwrap().scale(S::from_f64(1.0 / batch.len() as f64));

    let tpl_v = tpl.as_ref().map_or(0.0, |t| t.scalar_value().to_f64());
    let cls_v = cls.scalar_value().to_f64();
    let lsc_v = lsc.scalar_value().to_f64();

    let mut total = cls
        .scale(S::from_f64(config.w_cls))
        .add(&lsc.scale(S::from_f64(config.w_lsc)));
    if let Some(t) = tpl {
        total = total.add(&t.scale(S::from_f64(config.w_tpl)));
    }
    Ok(BatchLoss { total, tpl: tpl_v, cls: cls_v, lsc: lsc_v })
}

/// Eval-mode pooled middle-stage features over `indices` in the order
/// given, as (label, feature) columns for the prototype bank. Chunked so
/// one graph never holds more than a few forward passes.
pub fn pooled_features(
    model: &Model<f32>,
    dataset: &Dataset,
    indices: &[usize],
    cache: &BTreeMap<usize, EncodedSample>,
) -> Result<(Vec<u32>, Vec<Vec<f64>>), TrainError> {
    let mut labels = Vec::with_capacity(indices.len());
    let mut features = Vec::with_capacity(indices.len());
    for chunk in indices.chunks(16) {
        let graph = Graph::new();
        graph.set_check_finite(false);
        let binding = model.bind(&graph);
        let fwd = Forward::new(model, &binding, &graph, false, 0);
        for &ix in chunk {
            let out = fwd.main_pass(&cache[&ix]);
            let feat: Vec<f64> =
                out.pooled_mid.values().iter().map(|&v| Scalar::to_f64(v)).collect();
            if !feat.iter().all(|v| v.is_finite()) {
                return Err(TrainError::State(format!(
                    "non-finite pooled features for sample {ix}"
                )));
            }
            labels.push(dataset.samples[ix].label);
            features.push(feat);
        }
    }
    Ok((labels, features))
}

/// Encodes the listed samples once up front, keyed by dataset index.
pub fn encode_indices(
    model_config: &soar_model::ModelConfig,
    dataset: &Dataset,
    indices: &[usize],
) -> Result<BTreeMap<usize, EncodedSample>, TrainError> {
    let mut cache = BTreeMap::new();
    for &ix in indices {
        let seq = dataset
            .samples
            .get(ix)
            .ok_or_else(|| TrainError::Data(format!("sample index {ix} out of range")))?;
        let enc = encode_sample(
            seq,
            &dataset.meta.topology,
            model_config.image_h,
            model_config.image_w,
            model_config.patch,
        )?;
        cache.insert(ix, enc);
    }
    Ok(cache)
}

/// Full optimization run: batched two-branch forwards, weighted triplet +
/// classification + consistency loss, decoupled-decay updates under a
/// cosine schedule, per-epoch prototype recomputation, and the warm-up /
/// decenterization / prototype phase switch. The model is updated in
/// place; the returned log carries one row per epoch.
pub fn train(
    model: &mut Model<f32>,
    dataset: &Dataset,
    split: &OneShotSplit,
    config: &TrainConfig,
    checkpoint_dir: Option<&Path>,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    dataset.validate().map_err(|e| TrainError::Data(e.to_string()))?;
    if split.train.is_empty() {
        return Err(TrainError::Data("split has no training samples".into()));
    }
    if model.config.class_count != split.base_classes.len() {
        return Err(TrainError::Config(format!(
            "model has {} classes but the split has {} base classes",
            model.config.class_count,
            split.base_classes.len()
        )));
    }
    if model.config.in_channels != dataset.meta.channels {
        return Err(TrainError::Config(format!(
            "model expects {} channels, dataset has {}",
            model.config.in_channels, dataset.meta.channels
        )));
    }
    let class_index: BTreeMap<u32, usize> =
        split.base_classes.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    for &ix in &split.train {
        let label = dataset.samples[ix].label;
        if !class_index.contains_key(&label) {
            return Err(TrainError::Data(format!(
                "training sample {ix} has non-base label {label}"
            )));
        }
    }

    let cache = encode_indices(&model.config, dataset, &split.train)?;
    // Prototype sums run in ascending dataset index order, independent of
    // the split's class-grouped listing, so they are reproducible.
    let mut proto_order = split.train.clone();
    proto_order.sort_unstable();

    let mid_width = model.config.c_dim[1];
    let mut bank = PrototypeMemoryBank::new(config.warmup_epochs);
    let mut optimizer = AdamW::new(config.weight_decay);
    let mut log = TrainLog::default();

    for epoch in 0..config.epochs {
        let lr = cosine_lr(config.lr, epoch, config.epochs);
        let phase = phase_for(epoch, config);

        let mut order = split.train.clone();
        let mut shuffle_rng = ChaCha12Rng::seed_from_u64(stream_seed(
            config.seed,
            STREAM_SHUFFLE,
            epoch as u64,
            0,
        ));
        order.shuffle(&mut shuffle_rng);

        let mut sums = [0.0f64; 4];
        let mut seen = 0usize;
        for (batch_ix, chunk) in order.chunks(config.batch_size).enumerate() {
            let (loss, grads, bn_updates) = {
                let graph: Graph<f32> = Graph::new();
                // Divergence must surface as a typed error with the batch
                // coordinates, not an op panic.
                graph.set_check_finite(false);
                let binding = model.bind(&graph);
                let fwd = Forward::new(
                    model,
                    &binding,
                    &graph,
                    true,
                    stream_seed(config.seed, STREAM_DROP_PATH, epoch as u64, batch_ix as u64),
                );
                let aug_params = AugmentParams::from_binding(&binding);
                let batch: Vec<(&EncodedSample, u32, usize)> = chunk
                    .iter()
                    .map(|&ix| {
                        let label = dataset.samples[ix].label;
                        (&cache[&ix], label, class_index[&label])
                    })
                    .collect();
                let mut mine_rng = ChaCha12Rng::seed_from_u64(stream_seed(
                    config.seed,
                    STREAM_MINE,
                    epoch as u64,
                    batch_ix as u64,
                ));
                let loss = batch_loss(
                    &fwd,
                    &graph,
                    &aug_params,
                    &batch,
                    mid_width,
                    phase,
                    epoch,
                    &mut bank,
                    config,
                    &mut mine_rng,
                )?;
                let total_v = loss.total.scalar_value().to_f64();
                if ![loss.tpl, loss.cls, loss.lsc, total_v].iter().all(|v| v.is_finite()) {
                    return Err(TrainError::NonFinite {
                        epoch,
                        batch: batch_ix,
                        tpl: loss.tpl,
                        cls: loss.cls,
                        lsc: loss.lsc,
                    });
                }
                loss.total.backward();
                let grads: BTreeMap<String, Vec<f64>> = binding
                    .iter()
                    .filter_map(|(name, leaf)| {
                        leaf.grad().map(|g| {
                            (name.clone(), g.iter().map(|&v| Scalar::to_f64(v)).collect())
                        })
                    })
                    .collect();
                (loss, grads, fwd.take_bn_updates())
            };
            optimizer.step(model, &grads, lr);
            model.apply_bn_updates(&bn_updates);
            let w = chunk.len() as f64;
            sums[0] += loss.tpl * w;
            sums[1] += loss.cls * w;
            sums[2] += loss.lsc * w;
            sums[3] += loss.total.scalar_value().to_f64() * w;
            seen += chunk.len();
        }

        let (labels, features) = pooled_features(model, dataset, &proto_order, &cache)?;
        bank.rebuild(&labels, &features, epoch);

        let n = seen as f64;
        log.epochs.push(EpochLog {
            epoch,
            l_tpl: sums[0] / n,
            l_cls: sums[1] / n,
            l_lsc: sums[2] / n,
            total: sums[3] / n,
            phase: phase.name().to_string(),
            lr,
        });

        if config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0 {
            if let Some(dir) = checkpoint_dir {
                save_checkpoint(model, &dir.join(format!("epoch_{:03}", epoch + 1)))?;
            }
        }
    }

    Ok(TrainOutcome { log, bank })
}
