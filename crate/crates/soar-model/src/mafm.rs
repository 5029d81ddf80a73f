//! Three-stream fusion: spatial cross attention over branch pairs, the
//! mixed-fusion attention built from it, and the full fusion block that
//! turns per-stream patch embeddings into one mixed embedding. Free
//! functions over tensors so each piece can be gradient-checked alone.

use rand_chacha::ChaCha12Rng;
use soar_grad::{concat, Scalar, Tensor};

/// Symmetric pairwise merge: each operand is gated by the feature-axis
/// softmax of the other, averaged. sca(a, b) == sca(b, a).
pub fn sca<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Tensor<S> {
    let gated_b = a.softmax(1).mul(b);
    let gated_a = b.softmax(1).mul(a);
    gated_b.add(&gated_a).scale(S::from_f64(0.5))
}

/// Plain affine projection of token features.
pub fn affine<S: Scalar>(x: &Tensor<S>, weight: &Tensor<S>, bias: &Tensor<S>) -> Tensor<S> {
    x.matmul(weight).add_row(bias)
}

/// Weights of the mixed-fusion attention: queries from the joint stream,
/// keys and values from feature-axis concatenations of stream pairs.
pub struct FusionParams<S: Scalar> {
    pub q_jv: (Tensor<S>, Tensor<S>),
    pub q_bj: (Tensor<S>, Tensor<S>),
    pub k_jv: (Tensor<S>, Tensor<S>),
    pub v_jv: (Tensor<S>, Tensor<S>),
    pub k_bj: (Tensor<S>, Tensor<S>),
    pub v_bj: (Tensor<S>, Tensor<S>),
}

/// Mixed-fusion attention over normalized stream embeddings [N, d]:
/// branch projections are merged pairwise into single Q, K, V, then one
/// single-head attention with scale 1/sqrt(d) produces the fused tokens.
pub fn mixed_fusion<S: Scalar>(
    p: &FusionParams<S>,
    lj: &Tensor<S>,
    lv: &Tensor<S>,
    lb: &Tensor<S>,
) -> Tensor<S> {
    let d = lj.shape()[1];
    let jv = concat(&[lj.clone(), lv.clone()], 1);
    let bj = concat(&[lb.clone(), lj.clone()], 1);
    let q = sca(&affine(lj, &p.q_jv.0, &p.q_jv.1), &affine(lj, &p.q_bj.0, &p.q_bj.1));
    let k = sca(&affine(&jv, &p.k_jv.0, &p.k_jv.1), &affine(&bj, &p.k_bj.0, &p.k_bj.1));
    let v = sca(&affine(&jv, &p.v_jv.0, &p.v_jv.1), &affine(&bj, &p.v_bj.0, &p.v_bj.1));
    let scale = S::from_f64(1.0 / (d as f64).sqrt());
    let scores = q.matmul(&k.transpose()).scale(scale).softmax(1);
    scores.matmul(&v)
}

/// Full fusion block parameters: per-stream layer norms, the fusion
/// attention, and the post-fusion MLP with its own layer norm.
pub struct MafmParams<S: Scalar> {
    pub ln_j: (Tensor<S>, Tensor<S>),
    pub ln_v: (Tensor<S>, Tensor<S>),
    pub ln_b: (Tensor<S>, Tensor<S>),
    pub fusion: FusionParams<S>,
    pub mlp_ln: (Tensor<S>, Tensor<S>),
    pub mlp_fc1: (Tensor<S>, Tensor<S>),
    pub mlp_fc2: (Tensor<S>, Tensor<S>),
}

/// Fuses the three patch-embedding streams [N, d]:
///   fused    = mixed_fusion(LN(E_j), LN(E_v), LN(E_b))
///   anchored = avg(E_j, E_v, E_b) + drop_path(fused)
///   mixed    = drop_path(MLP(LN(anchored))) + anchored
/// Drop-path applies only at these two residual sites. With zero-initialized
/// fusion value projections and MLP output, mixed == avg exactly.
pub fn mafm<S: Scalar>(
    p: &MafmParams<S>,
    ej: &Tensor<S>,
    ev: &Tensor<S>,
    eb: &Tensor<S>,
    drop_path: f64,
    train: bool,
    rng: &mut ChaCha12Rng,
) -> Tensor<S> {
    let lj = ej.layer_norm(&p.ln_j.0, &p.ln_j.1);
    let lv = ev.layer_norm(&p.ln_v.0, &p.ln_v.1);
    let lb = eb.layer_norm(&p.ln_b.0, &p.ln_b.1);
    let fused = mixed_fusion(&p.fusion, &lj, &lv, &lb);
    let third = S::from_f64(1.0 / 3.0);
    let avg = ej.add(ev).add(eb).scale(third);
    let anchored = avg.add(&fused.drop_path(drop_path, train, rng));
    let normed = anchored.layer_norm(&p.mlp_ln.0, &p.mlp_ln.1);
    let hidden = affine(&normed, &p.mlp_fc1.0, &p.mlp_fc1.1).hardswish();
    let out = affine(&hidden, &p.mlp_fc2.0, &p.mlp_fc2.1);
    out.drop_path(drop_path, train, rng).add(&anchored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use soar_grad::Graph;

    fn randt(g: &Graph<f64>, rng: &mut ChaCha12Rng, shape: &[usize]) -> Tensor<f64> {
        let n: usize = shape.iter().product();
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        g.leaf(shape, v)
    }

    #[test]
    fn sca_is_symmetric() {
        let g = Graph::<f64>::new();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let a = randt(&g, &mut rng, &[3, 5]);
        let b = randt(&g, &mut rng, &[3, 5]);
        let ab = sca(&a, &b);
        let ba = sca(&b, &a);
        for (x, y) in ab.values().iter().zip(ba.values().iter()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn sca_of_equal_inputs_is_softmax_gated_self() {
        let g = Graph::<f64>::new();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let a = randt(&g, &mut rng, &[2, 4]);
        let out = sca(&a, &a);
        let expect = a.softmax(1).mul(&a);
        for (x, y) in out.values().iter().zip(expect.values().iter()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn sca_of_zero_pair_is_zero() {
        let g = Graph::<f64>::new();
        let z = g.leaf(&[2, 3], vec![0.0; 6]);
        assert!(sca(&z, &z).values().iter().all(|&v| v == 0.0));
    }

    fn fusion_params(g: &Graph<f64>, rng: &mut ChaCha12Rng, d: usize) -> FusionParams<f64> {
        let mut pair = |d_in: usize| (randt(g, rng, &[d_in, d]), randt(g, rng, &[d]));
        FusionParams {
            q_jv: pair(d),
            q_bj: pair(d),
            k_jv: pair(2 * d),
            v_jv: pair(2 * d),
            k_bj: pair(2 * d),
            v_bj: pair(2 * d),
        }
    }

    #[test]
    fn mixed_fusion_with_zero_value_projections_is_zero() {
        let g = Graph::<f64>::new();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let d = 4;
        let mut p = fusion_params(&g, &mut rng, d);
        p.v_jv = (g.leaf(&[2 * d, d], vec![0.0; 2 * d * d]), g.leaf(&[d], vec![0.0; d]));
        p.v_bj = (g.leaf(&[2 * d, d], vec![0.0; 2 * d * d]), g.leaf(&[d], vec![0.0; d]));
        let lj = randt(&g, &mut rng, &[5, d]);
        let lv = randt(&g, &mut rng, &[5, d]);
        let lb = randt(&g, &mut rng, &[5, d]);
        let out = mixed_fusion(&p, &lj, &lv, &lb);
        assert!(out.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mixed_fusion_rows_are_convex_mixtures_of_values() {
        // Attention output per token lies inside the convex hull of V rows;
        // check the coordinate-wise min/max bound.
        let g = Graph::<f64>::new();
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let d = 3;
        let p = fusion_params(&g, &mut rng, d);
        let lj = randt(&g, &mut rng, &[4, d]);
        let lv = randt(&g, &mut rng, &[4, d]);
        let lb = randt(&g, &mut rng, &[4, d]);
        let jv = concat(&[lj.clone(), lv.clone()], 1);
        let bj = concat(&[lb.clone(), lj.clone()], 1);
        let v = sca(
            &affine(&jv, &p.v_jv.0, &p.v_jv.1),
            &affine(&bj, &p.v_bj.0, &p.v_bj.1),
        );
        let out = mixed_fusion(&p, &lj, &lv, &lb);
        let vv = v.values();
        for col in 0..d {
            let column: Vec<f64> = (0..4).map(|r| vv[r * d + col]).collect();
            let lo = column.iter().cloned().fold(f64::INFINITY, f64::min) - 1e-12;
            let hi = column.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1e-12;
            for r in 0..4 {
                let x = out.values()[r * d + col];
                assert!(x >= lo && x <= hi, "row {r} col {col}: {x} outside [{lo}, {hi}]");
            }
        }
    }
}
