use soar_grad::{Scalar, Tensor};

/// Squared Euclidean distance with a small per-coordinate offset folded
/// into the difference: ||a - b + eps*1||^2. The offset keeps the gradient
/// of sqrt-free metric learning away from exact zero at a == b.
pub fn pairwise_distance<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>, eps: f64) -> Tensor<S> {
    let d = a.sub(b).add_scalar(S::from_f64(eps));
    d.mul(&d).sum_all()
}

/// Mean over triplets of max(D(a,p) - D(a,n) + margin, 0): zero once every
/// negative sits farther from its anchor than the positive by at least the
/// margin. The reference formula prints the subtraction the other way
/// round, which contradicts its own prose; the standard orientation is
/// implemented.
pub fn triplet_margin_loss<S: Scalar>(
    anchors: &[Tensor<S>],
    positives: &[Tensor<S>],
    negatives: &[Tensor<S>],
    margin: f64,
    eps: f64,
) -> Tensor<S> {
    assert_eq!(anchors.len(), positives.len());
    assert_eq!(anchors.len(), negatives.len());
    assert!(!anchors.is_empty(), "triplet loss needs at least one triplet");
    let mut total: Option<Tensor<S>> = None;
    for ((a, p), n) in anchors.iter().zip(positives).zip(negatives) {
        let term = pairwise_distance(a, p, eps)
            .sub(&pairwise_distance(a, n, eps))
            .add_scalar(S::from_f64(margin))
            .relu();
        total = Some(match total {
            Some(t) => t.add(&term),
            None => term,
        });
    }
    total.unwrap().scale(S::from_f64(1.0 / anchors.len() as f64))
}

/// Softmax cross-entropy of logit rows [N, C] against integer labels,
/// averaged over the batch.
pub fn cross_entropy<S: Scalar>(logits: &Tensor<S>, labels: &[usize]) -> Tensor<S> {
    logits.cross_entropy_logits(labels)
}

/// Latent space consistency: 1 - cos(e, e_star) over two 1D embeddings.
/// Bounded in [0, 2], zero when the branches agree in direction.
pub fn lsc_loss<S: Scalar>(e: &Tensor<S>, e_star: &Tensor<S>) -> Tensor<S> {
    e.cosine_similarity(e_star).scale(S::from_f64(-1.0)).add_scalar(S::one())
}
