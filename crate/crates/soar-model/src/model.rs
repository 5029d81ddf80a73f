//! The three-stream recognition network: per-stream conv stems, fusion of
//! the streams, staged token attention with inter-stage shrinking, and the
//! embedding/classifier heads. One `Forward` drives a whole pass on one
//! graph; parameters are bound to graph leaves once per graph so a batch of
//! samples shares leaves and gradients accumulate across the batch.

use std::cell::RefCell;
use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use soar_grad::{concat, Graph, Scalar, Tensor};

use crate::encoding::EncodedSample;
use crate::mafm::{affine, mafm, FusionParams, MafmParams};
use crate::params::{is_learned, ParamStore};
use crate::{ModelConfig, ModelError};

/// Momentum for folding batch statistics into running statistics.
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone)]
pub struct Model<S: Scalar> {
    pub config: ModelConfig,
    pub store: ParamStore<S>,
}

impl<S: Scalar> Model<S> {
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let store = ParamStore::init(&config, seed);
        Ok(Model { config, store })
    }

    /// Creates graph leaves for every learned parameter. Running statistics
    /// stay in the store and are read directly during eval-mode norms.
    pub fn bind(&self, graph: &Graph<S>) -> Binding<S> {
        let mut map = BTreeMap::new();
        for (name, param) in self.store.iter() {
            if is_learned(name) {
                map.insert(name.clone(), graph.leaf(&param.shape, param.values.clone()));
            }
        }
        Binding { map }
    }

    /// Folds collected batch statistics into the running statistics:
    /// running = momentum * running + (1 - momentum) * batch, applied in
    /// collection order.
    pub fn apply_bn_updates(&mut self, updates: &[BnUpdate<S>]) {
        let m = S::from_f64(BN_MOMENTUM);
        let one_m = S::from_f64(1.0 - BN_MOMENTUM);
        for u in updates {
            let mean = self.store.get_mut(&format!("state.{}.bn.mean", u.prefix));
            for (r, &b) in mean.values.iter_mut().zip(&u.mean) {
                *r = m * *r + one_m * b;
            }
            let var = self.store.get_mut(&format!("state.{}.bn.var", u.prefix));
            for (r, &b) in var.values.iter_mut().zip(&u.var) {
                *r = m * *r + one_m * b;
            }
        }
    }
}

/// Learned parameters bound to one graph's leaves.
pub struct Binding<S: Scalar> {
    map: BTreeMap<String, Tensor<S>>,
}

impl<S: Scalar> Binding<S> {
    pub fn get(&self, name: &str) -> &Tensor<S> {
        self.map
            .get(name)
            .unwrap_or_else(|| panic!("parameter {name} is not bound"))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor<S>)> {
        self.map.iter()
    }
}

/// Batch statistics observed by one train-mode norm, keyed by its prefix.
#[derive(Debug, Clone)]
pub struct BnUpdate<S> {
    pub prefix: String,
    pub mean: Vec<S>,
    pub var: Vec<S>,
}

/// Outputs of the deployed (main) branch for one sample.
pub struct MainOut<S: Scalar> {
    /// Pooled tokens after the middle stage [c_dim[1]]; prototype source.
    pub pooled_mid: Tensor<S>,
    /// Final embedding [emb_dim].
    pub embedding: Tensor<S>,
    /// Base-class logits [1, class_count].
    pub logits: Tensor<S>,
}

/// Outputs of a training pass: the main branch plus the auxiliary branch
/// with feature augmentation applied after its middle stage.
pub struct TrainOut<S: Scalar> {
    pub main: MainOut<S>,
    /// Pooled auxiliary tokens before augmentation [c_dim[1]].
    pub pooled_mid_aux: Tensor<S>,
    /// Auxiliary embedding [emb_dim].
    pub embedding_aux: Tensor<S>,
}

/// One forward pass context: train/eval mode, the drop-path random stream,
/// and the batch statistics collected by train-mode norms.
pub struct Forward<'a, S: Scalar> {
    model: &'a Model<S>,
    binding: &'a Binding<S>,
    graph: Graph<S>,
    train: bool,
    rng: RefCell<ChaCha12Rng>,
    bn_updates: RefCell<Vec<BnUpdate<S>>>,
}

fn grid_positions(grid: (usize, usize)) -> Vec<(usize, usize)> {
    let mut pos = Vec::with_capacity(grid.0 * grid.1);
    for r in 0..grid.0 {
        for c in 0..grid.1 {
            pos.push((r, c));
        }
    }
    pos
}

/// Token indices and full-grid positions of the stride-2 subsample, plus the
/// shrunken grid.
fn subsample(grid: (usize, usize)) -> (Vec<usize>, Vec<(usize, usize)>, (usize, usize)) {
    let mut idx = Vec::new();
    let mut pos = Vec::new();
    for r in (0..grid.0).step_by(2) {
        for c in (0..grid.1).step_by(2) {
            idx.push(r * grid.1 + c);
            pos.push((r, c));
        }
    }
    (idx, pos, (grid.0.div_ceil(2), grid.1.div_ceil(2)))
}

fn col_slice<S: Scalar>(t: &Tensor<S>, start: usize, len: usize) -> Tensor<S> {
    let idx: Vec<usize> = (start..start + len).collect();
    t.transpose().gather_rows(&idx).transpose()
}

/// Mean over tokens: [N, C] -> [1, C].
fn pool<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    let c = x.shape()[1];
    x.mean_axis(0).reshape(&[1, c])
}

impl<'a, S: Scalar> Forward<'a, S> {
    pub fn new(model: &'a Model<S>, binding: &'a Binding<S>, graph: &Graph<S>, train: bool, seed: u64) -> Self {
        Forward {
            model,
            binding,
            graph: graph.clone(),
            train,
            rng: RefCell::new(ChaCha12Rng::seed_from_u64(seed)),
            bn_updates: RefCell::new(Vec::new()),
        }
    }

    /// Batch statistics collected so far, in occurrence order.
    pub fn take_bn_updates(&self) -> Vec<BnUpdate<S>> {
        std::mem::take(&mut self.bn_updates.borrow_mut())
    }

    fn p(&self, name: &str) -> Tensor<S> {
        self.binding.get(name).clone()
    }

    fn state(&self, name: &str) -> Vec<S> {
        self.model.store.get(name).values.clone()
    }

    fn bn(&self, x: &Tensor<S>, prefix: &str, ch_axis: usize) -> Tensor<S> {
        let gain = self.p(&format!("{prefix}.bn.gain"));
        let bias = self.p(&format!("{prefix}.bn.bias"));
        // Batch statistics over a single element are degenerate (the output
        // collapses to the bias and gradients die), so single-token norms
        // always run on running statistics, train mode included.
        let batch = if ch_axis == 1 { x.shape()[0] } else { x.shape()[1] };
        if self.train && batch > 1 {
            let (y, mean, var) = x.batch_norm_train(&gain, &bias, ch_axis);
            self.bn_updates.borrow_mut().push(BnUpdate {
                prefix: prefix.to_string(),
                mean,
                var,
            });
            y
        } else {
            let mean = self.state(&format!("state.{prefix}.bn.mean"));
            let var = self.state(&format!("state.{prefix}.bn.var"));
            x.batch_norm_eval(&gain, &bias, &mean, &var, ch_axis)
        }
    }

    /// Token projection: matmul with batch norm over the token axis in
    /// place of a bias.
    fn bn_proj(&self, x: &Tensor<S>, prefix: &str) -> Tensor<S> {
        let w = self.p(&format!("{prefix}.weight"));
        self.bn(&x.matmul(&w), prefix, 1)
    }

    /// Four stride-2 convolutions with channel doubling, each followed by
    /// batch norm and hard-swish; returns tokens [grid_h * grid_w, c_dim[0]].
    fn stem(&self, stream: &str, image: &[f64], h: usize, w: usize) -> Tensor<S> {
        let cfg = &self.model.config;
        let d = cfg.c_dim[0];
        let chain = [cfg.in_channels, d / 8, d / 4, d / 2, d];
        assert_eq!(image.len(), cfg.in_channels * h * w, "image length");
        let data: Vec<S> = image.iter().map(|&v| S::from_f64(v)).collect();
        let mut cur = self.graph.constant(&[chain[0], h, w], data);
        let (mut hh, mut ww) = (h, w);
        for i in 0..4 {
            let prefix = format!("stem.{stream}.conv{i}");
            let kern = self.p(&format!("{prefix}.weight"));
            cur = cur.conv2d(&kern, None, 2);
            hh = hh.div_ceil(2);
            ww = ww.div_ceil(2);
            cur = cur.reshape(&[chain[i + 1], hh * ww]);
            cur = self.bn(&cur, &prefix, 0).hardswish();
            if i < 3 {
                cur = cur.reshape(&[chain[i + 1], hh, ww]);
            }
        }
        cur.transpose()
    }

    /// Per-stream patch embeddings [N, c_dim[0]] in (joints, velocities,
    /// bones) order.
    pub fn patch_embeddings(&self, enc: &EncodedSample) -> [Tensor<S>; 3] {
        let cfg = &self.model.config;
        assert_eq!(enc.height, cfg.image_h, "encoded height");
        assert_eq!(enc.width, cfg.image_w, "encoded width");
        assert_eq!(enc.channels, cfg.in_channels, "encoded channels");
        [
            self.stem("j", &enc.joints, enc.height, enc.width),
            self.stem("v", &enc.velocities, enc.height, enc.width),
            self.stem("b", &enc.bones, enc.height, enc.width),
        ]
    }

    fn mafm_params(&self) -> MafmParams<S> {
        let pair = |n: &str| (self.p(&format!("{n}.gain")), self.p(&format!("{n}.bias")));
        let wb = |n: &str| (self.p(&format!("{n}.weight")), self.p(&format!("{n}.bias")));
        MafmParams {
            ln_j: pair("mafm.ln_j"),
            ln_v: pair("mafm.ln_v"),
            ln_b: pair("mafm.ln_b"),
            fusion: FusionParams {
                q_jv: wb("mafm.mf.q_jv"),
                q_bj: wb("mafm.mf.q_bj"),
                k_jv: wb("mafm.mf.k_jv"),
                v_jv: wb("mafm.mf.v_jv"),
                k_bj: wb("mafm.mf.k_bj"),
                v_bj: wb("mafm.mf.v_bj"),
            },
            mlp_ln: pair("mafm.mlp.ln"),
            mlp_fc1: wb("mafm.mlp.fc1"),
            mlp_fc2: wb("mafm.mlp.fc2"),
        }
    }

    /// Fuses the three patch-embedding streams into the mixed tokens.
    pub fn fuse(&self, ej: &Tensor<S>, ev: &Tensor<S>, eb: &Tensor<S>) -> Tensor<S> {
        let params = self.mafm_params();
        let mut rng = self.rng.borrow_mut();
        mafm(&params, ej, ev, eb, self.model.config.drop_path, self.train, &mut rng)
    }

    fn attention(
        &self,
        prefix: &str,
        x_q: &Tensor<S>,
        x_kv: &Tensor<S>,
        heads: usize,
        qk: usize,
        v_width: usize,
        q_pos: &[(usize, usize)],
        k_pos: &[(usize, usize)],
        grid: (usize, usize),
    ) -> Tensor<S> {
        let q = self.bn_proj(x_q, &format!("{prefix}.q"));
        let k = self.bn_proj(x_kv, &format!("{prefix}.k"));
        let v = self.bn_proj(x_kv, &format!("{prefix}.v"));
        let (nq, nk) = (q_pos.len(), k_pos.len());
        let table_w = 2 * grid.1 - 1;
        let table_len = (2 * grid.0 - 1) * table_w;
        let mut offsets = Vec::with_capacity(nq * nk);
        for &(qr, qc) in q_pos {
            for &(kr, kc) in k_pos {
                offsets.push((qr + grid.0 - 1 - kr) * table_w + (qc + grid.1 - 1 - kc));
            }
        }
        let bias_table = self.p(&format!("{prefix}.bias_att"));
        let scale = S::from_f64(1.0 / (qk as f64).sqrt());
        let mut outs = Vec::with_capacity(heads);
        for head in 0..heads {
            let qh = col_slice(&q, head * qk, qk);
            let kh = col_slice(&k, head * qk, qk);
            let vh = col_slice(&v, head * v_width, v_width);
            let bias = bias_table
                .gather_rows(&[head])
                .reshape(&[table_len, 1])
                .gather_rows(&offsets)
                .reshape(&[nq, nk]);
            let scores = qh.matmul(&kh.transpose()).scale(scale).softmax(1).add(&bias);
            outs.push(scores.matmul(&vh));
        }
        let merged = concat(&outs, 1).hardswish();
        self.bn_proj(&merged, &format!("{prefix}.top"))
    }

    /// Residual token MLP with expansion 2.
    fn token_mlp(&self, prefix: &str, x: &Tensor<S>) -> Tensor<S> {
        let hidden = self.bn_proj(x, &format!("{prefix}.fc1")).hardswish();
        x.add(&self.bn_proj(&hidden, &format!("{prefix}.fc2")))
    }

    /// One residual token-attention block: multi-head attention with the
    /// relative-position bias, residual add, then the residual token MLP.
    /// Output shape equals input shape. `prefix` selects the parameter
    /// family, `stage` the head/width configuration.
    pub fn attention_block(
        &self,
        prefix: &str,
        x: &Tensor<S>,
        stage: usize,
        grid: (usize, usize),
    ) -> Tensor<S> {
        let cfg = &self.model.config;
        let pos = grid_positions(grid);
        let att = self.attention(
            prefix,
            x,
            x,
            cfg.n_head[stage],
            cfg.d_key,
            cfg.v_width(stage),
            &pos,
            &pos,
            grid,
        );
        self.token_mlp(&format!("{prefix}.mlp"), &x.add(&att))
    }

    fn stage(&self, branch: &str, stage: usize, mut x: Tensor<S>, grid: (usize, usize)) -> Tensor<S> {
        for block in 0..self.model.config.h_dep[stage] {
            x = self.attention_block(&format!("{branch}.stage{stage}.block{block}"), &x, stage, grid);
        }
        x
    }

    /// Downsampling attention between stages: queries from the stride-2
    /// token subsample, keys and values from the full grid, then a residual
    /// MLP at the new width. No residual across the attention itself since
    /// the token count and width change.
    fn shrink(&self, branch: &str, t: usize, x: &Tensor<S>, grid: (usize, usize)) -> (Tensor<S>, (usize, usize)) {
        let cfg = &self.model.config;
        let (sub_idx, q_pos, new_grid) = subsample(grid);
        let k_pos = grid_positions(grid);
        let x_sub = x.gather_rows(&sub_idx);
        let prefix = format!("{branch}.shrink{t}");
        let att = self.attention(
            &prefix,
            &x_sub,
            x,
            cfg.n_head[t + 1],
            cfg.d_key,
            cfg.v_width(t + 1),
            &q_pos,
            &k_pos,
            grid,
        );
        (self.token_mlp(&format!("{prefix}.mlp"), &att), new_grid)
    }

    /// Two affine layers with an inner ReLU: pooled tokens -> embedding.
    fn emb(&self, pooled: &Tensor<S>) -> Tensor<S> {
        let h = affine(pooled, &self.p("emb.fc1.weight"), &self.p("emb.fc1.bias")).relu();
        affine(&h, &self.p("emb.fc2.weight"), &self.p("emb.fc2.bias"))
    }

    /// Runs one branch from the mixed tokens to its middle-stage tokens.
    fn branch_to_mid(&self, branch: &str, mixed: &Tensor<S>) -> Tensor<S> {
        let grids = self.model.config.grids();
        let x = self.stage(branch, 0, mixed.clone(), grids[0]);
        let (x, _) = self.shrink(branch, 0, &x, grids[0]);
        self.stage(branch, 1, x, grids[1])
    }

    /// Last shrink, final stage, pooling and embedding.
    fn branch_finish(&self, branch: &str, mid: &Tensor<S>) -> Tensor<S> {
        let grids = self.model.config.grids();
        let (x, _) = self.shrink(branch, 1, mid, grids[1]);
        let x = self.stage(branch, 2, x, grids[2]);
        self.emb(&pool(&x))
    }

    fn main_from_mixed(&self, mixed: &Tensor<S>) -> MainOut<S> {
        let cfg = &self.model.config;
        let mid = self.branch_to_mid("main", mixed);
        let pooled_mid = pool(&mid);
        let e = self.branch_finish("main", &mid);
        let logits = affine(&e, &self.p("head.weight"), &self.p("head.bias"));
        MainOut {
            pooled_mid: pooled_mid.reshape(&[cfg.c_dim[1]]),
            embedding: e.reshape(&[cfg.emb_dim]),
            logits,
        }
    }

    /// Deployed branch only: stems, fusion, main stages, embedding, logits.
    pub fn main_pass(&self, enc: &EncodedSample) -> MainOut<S> {
        let [ej, ev, eb] = self.patch_embeddings(enc);
        let mixed = self.fuse(&ej, &ev, &eb);
        self.main_from_mixed(&mixed)
    }

    /// Main and auxiliary branches over shared stems and fusion. `augment`
    /// transforms the auxiliary middle-stage tokens [N, c_dim[1]]; the
    /// training crate supplies it with the phase-appropriate prototype.
    pub fn train_pass(
        &self,
        enc: &EncodedSample,
        augment: &dyn Fn(&Tensor<S>) -> Tensor<S>,
    ) -> TrainOut<S> {
        let cfg = &self.model.config;
        let [ej, ev, eb] = self.patch_embeddings(enc);
        let mixed = self.fuse(&ej, &ev, &eb);
        let main = self.main_from_mixed(&mixed);
        let mid_aux = self.branch_to_mid("aux", &mixed);
        let pooled_mid_aux = pool(&mid_aux).reshape(&[cfg.c_dim[1]]);
        let augmented = augment(&mid_aux);
        assert_eq!(augmented.shape(), mid_aux.shape(), "augment must preserve token shape");
        let e_aux = self.branch_finish("aux", &augmented);
        TrainOut {
            main,
            pooled_mid_aux,
            embedding_aux: e_aux.reshape(&[cfg.emb_dim]),
        }
    }
}
