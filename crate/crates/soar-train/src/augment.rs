use soar_grad::{concat, Graph, Scalar, Tensor};
use soar_model::Binding;

use crate::{Phase, PrototypeMemoryBank, TrainError};

/// The three learned affine maps of the auxiliary feature augmentation,
/// cloned out of a graph binding. g1/g2 are square over the token width d;
/// g3 maps the 2d concatenation back to d and is zero-initialized so the
/// whole block starts as ReLU(identity).
pub struct AugmentParams<S: Scalar> {
    pub g1: (Tensor<S>, Tensor<S>),
    pub g2: (Tensor<S>, Tensor<S>),
    pub g3: (Tensor<S>, Tensor<S>),
}

impl<S: Scalar> AugmentParams<S> {
    pub fn from_binding(binding: &Binding<S>) -> Self {
        let pair = |n: &str| {
            (
                binding.get(&format!("aux.g{n}.weight")).clone(),
                binding.get(&format!("aux.g{n}.bias")).clone(),
            )
        };
        AugmentParams { g1: pair("1"), g2: pair("2"), g3: pair("3") }
    }
}

fn affine<S: Scalar>(x: &Tensor<S>, (w, b): &(Tensor<S>, Tensor<S>)) -> Tensor<S> {
    x.matmul(w).add_row(b)
}

/// Prototype-guided token augmentation. The prototype gates a channel view
/// of the tokens (softmax over features), two projections attend to each
/// other across tokens, and the aggregate joins the residual stream:
///   E_r = g2(softmax_feat(p) * tokens), E_l = g1(tokens),
///   W = softmax_tokens(E_l E_r^T / sqrt(d)),
///   out = ReLU(tokens + g3([W E_r, E_l])).
pub fn augment_features<S: Scalar>(
    params: &AugmentParams<S>,
    tokens: &Tensor<S>,
    prototype: &Tensor<S>,
) -> Tensor<S> {
    let shape = tokens.shape();
    assert_eq!(shape.len(), 2, "tokens must be [N, d]");
    let d = shape[1];
    assert_eq!(prototype.shape(), vec![d], "prototype width must match tokens");
    let gate = prototype.reshape(&[1, d]).softmax(1).reshape(&[d]);
    let e_r = affine(&tokens.mul_row(&gate), &params.g2);
    let e_l = affine(tokens, &params.g1);
    let w = e_l
        .matmul(&e_r.transpose())
        .scale(S::from_f64(1.0 / (d as f64).sqrt()))
        .softmax(1);
    let agg = affine(&concat(&[w.matmul(&e_r), e_l.clone()], 1), &params.g3);
    tokens.add(&agg).relu()
}

/// Where a sample's prototype comes from, fixed per phase before the
/// forward pass so bank reads stay outside the graph closure.
pub enum PrototypeSource<S: Scalar> {
    /// Warm-up self-augmentation: the sample's own pooled tokens, detached.
    SelfPooled,
    /// A constant vector: zeros during decenterization, a bank entry after.
    Fixed(Tensor<S>),
}

impl<S: Scalar> PrototypeSource<S> {
    /// Resolves the phase schedule for one sample. Prototype-phase reads
    /// consult the bank and fail if the label has no entry.
    pub fn for_phase(
        graph: &Graph<S>,
        phase: Phase,
        label: u32,
        epoch: usize,
        bank: &mut PrototypeMemoryBank,
        d: usize,
    ) -> Result<Self, TrainError> {
        match phase {
            Phase::Warmup => Ok(PrototypeSource::SelfPooled),
            Phase::Decenter => {
                Ok(PrototypeSource::Fixed(graph.constant(&[d], vec![S::zero(); d])))
            }
            Phase::Prototype => {
                let p = bank.get(label, epoch)?;
                assert_eq!(p.len(), d, "bank width does not match tokens");
                let vals = p.iter().map(|&v| S::from_f64(v)).collect();
                Ok(PrototypeSource::Fixed(graph.constant(&[d], vals)))
            }
        }
    }

    pub fn materialize(&self, tokens: &Tensor<S>) -> Tensor<S> {
        match self {
            PrototypeSource::SelfPooled => tokens.mean_axis(0).detach(),
            PrototypeSource::Fixed(t) => t.clone(),
        }
    }
}
