//! Parameter catalog: one authoritative enumeration of every tensor in the
//! model, walked identically by initialization, counting, checkpointing and
//! the optimizer. Entries prefixed `state.` are batch-norm running statistics
//! (not learned); entries under `aux.` belong to the training-only auxiliary
//! branch and are excluded from the deployed parameter count.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use soar_grad::Scalar;

use crate::ModelConfig;

#[derive(Debug, Clone)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

struct Catalog {
    entries: Vec<ParamEntry>,
}

impl Catalog {
    fn push(&mut self, name: String, shape: Vec<usize>) {
        self.entries.push(ParamEntry { name, shape });
    }

    /// Affine projection with batch norm in place of a bias.
    fn bn_proj(&mut self, prefix: &str, d_in: usize, d_out: usize) {
        self.push(format!("{prefix}.weight"), vec![d_in, d_out]);
        self.bn(prefix, d_out);
    }

    fn bn(&mut self, prefix: &str, channels: usize) {
        self.push(format!("{prefix}.bn.gain"), vec![channels]);
        self.push(format!("{prefix}.bn.bias"), vec![channels]);
        self.push(format!("state.{prefix}.bn.mean"), vec![channels]);
        self.push(format!("state.{prefix}.bn.var"), vec![channels]);
    }

    fn affine(&mut self, prefix: &str, d_in: usize, d_out: usize) {
        self.push(format!("{prefix}.weight"), vec![d_in, d_out]);
        self.push(format!("{prefix}.bias"), vec![d_out]);
    }

    fn layer_norm(&mut self, prefix: &str, d: usize) {
        self.push(format!("{prefix}.gain"), vec![d]);
        self.push(format!("{prefix}.bias"), vec![d]);
    }

    fn attention(&mut self, prefix: &str, d_in: usize, d_out: usize, heads: usize, qk: usize, v: usize, grid: (usize, usize)) {
        self.bn_proj(&format!("{prefix}.q"), d_in, heads * qk);
        self.bn_proj(&format!("{prefix}.k"), d_in, heads * qk);
        self.bn_proj(&format!("{prefix}.v"), d_in, heads * v);
        self.bn_proj(&format!("{prefix}.top"), heads * v, d_out);
        let table = (2 * grid.0 - 1) * (2 * grid.1 - 1);
        self.push(format!("{prefix}.bias_att"), vec![heads, table]);
    }

    fn token_mlp(&mut self, prefix: &str, d: usize) {
        self.bn_proj(&format!("{prefix}.fc1"), d, 2 * d);
        self.bn_proj(&format!("{prefix}.fc2"), 2 * d, d);
    }
}

/// Every parameter and state tensor, in definition order.
pub fn catalog(config: &ModelConfig) -> Vec<ParamEntry> {
    let mut c = Catalog { entries: Vec::new() };
    let d = config.c_dim[0];
    let grids = config.grids();

    for stream in ["j", "v", "b"] {
        let chain = [config.in_channels, d / 8, d / 4, d / 2, d];
        for i in 0..4 {
            let prefix = format!("stem.{stream}.conv{i}");
            c.push(format!("{prefix}.weight"), vec![chain[i + 1], chain[i], 3, 3]);
            c.bn(&prefix, chain[i + 1]);
        }
    }

    for s in ["j", "v", "b"] {
        c.layer_norm(&format!("mafm.ln_{s}"), d);
    }
    c.affine("mafm.mf.q_jv", d, d);
    c.affine("mafm.mf.q_bj", d, d);
    for branch in ["jv", "bj"] {
        c.affine(&format!("mafm.mf.k_{branch}"), 2 * d, d);
        c.affine(&format!("mafm.mf.v_{branch}"), 2 * d, d);
    }
    c.layer_norm("mafm.mlp.ln", d);
    c.affine("mafm.mlp.fc1", d, 2 * d);
    c.affine("mafm.mlp.fc2", 2 * d, d);

    for branch in ["main", "aux"] {
        for stage in 0..3 {
            let dim = config.c_dim[stage];
            for block in 0..config.h_dep[stage] {
                let prefix = format!("{branch}.stage{stage}.block{block}");
                c.attention(&prefix, dim, dim, config.n_head[stage], config.d_key, config.v_width(stage), grids[stage]);
                c.token_mlp(&format!("{prefix}.mlp"), dim);
            }
            if stage < 2 {
                let prefix = format!("{branch}.shrink{stage}");
                c.attention(
                    &prefix,
                    dim,
                    config.c_dim[stage + 1],
                    config.n_head[stage + 1],
                    config.d_key,
                    config.v_width(stage + 1),
                    grids[stage],
                );
                c.token_mlp(&format!("{prefix}.mlp"), config.c_dim[stage + 1]);
            }
        }
    }

    let mid = config.c_dim[1];
    c.affine("aux.g1", mid, mid);
    c.affine("aux.g2", mid, mid);
    c.affine("aux.g3", 2 * mid, mid);

    c.affine("emb.fc1", config.c_dim[2], config.emb_hidden);
    c.affine("emb.fc2", config.emb_hidden, config.emb_dim);
    c.affine("head", config.emb_dim, config.class_count);

    c.entries
}

/// Learned scalar count of the deployed recognition network: stems, fusion,
/// main stages, embedding head and classifier. Running statistics and the
/// training-only auxiliary branch are excluded.
pub fn param_count(config: &ModelConfig) -> usize {
    catalog(config)
        .iter()
        .filter(|e| !e.name.starts_with("state.") && !e.name.starts_with("aux."))
        .map(|e| numel(&e.shape))
        .sum()
}

#[derive(Debug, Clone)]
pub struct Param<S> {
    pub shape: Vec<usize>,
    pub values: Vec<S>,
}

/// Zero-mean normal draw via Box-Muller on the uniform generator, keeping
/// the dependency surface to `rand`'s core traits.
fn normal_draw<R: Rng>(rng: &mut R, std: f64) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    std * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Initialization class of a parameter, decided by name.
enum Init {
    Normal,
    Zeros,
    Ones,
}

fn init_class(name: &str) -> Init {
    if name.starts_with("state.") {
        return if name.ends_with(".var") { Init::Ones } else { Init::Zeros };
    }
    // Residual-branch outputs start at zero so every residual block is the
    // identity at initialization: attention tops and MLP second layers fold
    // to zero through a zero batch-norm gain, plain-affine fusion outputs
    // through zero weights.
    let zero_weight = name == "mafm.mf.v_jv.weight"
        || name == "mafm.mf.v_bj.weight"
        || name == "mafm.mlp.fc2.weight"
        || name == "aux.g3.weight";
    if zero_weight {
        return Init::Zeros;
    }
    if name.ends_with(".bn.gain") {
        let residual_tail = (name.contains(".block") && name.contains(".top."))
            || name.contains(".mlp.fc2.");
        return if residual_tail { Init::Zeros } else { Init::Ones };
    }
    if name.ends_with(".ln.gain") || name.contains(".ln_") && name.ends_with(".gain") {
        return Init::Ones;
    }
    if name.ends_with(".bias") || name.ends_with(".bias_att") {
        return Init::Zeros;
    }
    Init::Normal
}

/// Named parameter store. Iteration (checkpointing, optimization) is in
/// name order; initialization draws follow catalog order so the random
/// stream is stable.
#[derive(Debug, Clone)]
pub struct ParamStore<S> {
    map: BTreeMap<String, Param<S>>,
}

impl<S: Scalar> ParamStore<S> {
    pub fn init(config: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut map = BTreeMap::new();
        for entry in catalog(config) {
            let n = numel(&entry.shape);
            let values: Vec<S> = match init_class(&entry.name) {
                Init::Normal => (0..n).map(|_| S::from_f64(normal_draw(&mut rng, 0.02))).collect(),
                Init::Zeros => vec![S::from_f64(0.0); n],
                Init::Ones => vec![S::from_f64(1.0); n],
            };
            map.insert(entry.name, Param { shape: entry.shape, values });
        }
        ParamStore { map }
    }

    pub fn get(&self, name: &str) -> &Param<S> {
        self.map
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Param<S> {
        self.map
            .get_mut(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Param<S>)> {
        self.map.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Param<S>)> {
        self.map.iter_mut().map(|(k, v)| (&*k, v))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.map.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Learned parameters are everything outside `state.`; the optimizer walks
/// these in name order.
pub fn is_learned(name: &str) -> bool {
    !name.starts_with("state.")
}
