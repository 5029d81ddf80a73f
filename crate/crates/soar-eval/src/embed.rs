use soar_data::{SkeletonSequence, SkeletonTopology};
use soar_grad::{Graph, Scalar};
use soar_model::{encode_sample, Forward, Model};

use crate::EvalError;

/// Deployed-branch embeddings for a batch of sequences, in input order.
/// Sequences share a graph in chunks so the tape stays small.
pub fn embed_samples(
    model: &Model<f32>,
    samples: &[&SkeletonSequence],
    topology: &SkeletonTopology,
) -> Result<Vec<Vec<f32>>, EvalError> {
    let cfg = &model.config;
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(16) {
        let graph = Graph::new();
        // A degenerate checkpoint should surface as a typed error, not an
        // op panic.
        graph.set_check_finite(false);
        let binding = model.bind(&graph);
        let fwd = Forward::new(model, &binding, &graph, false, 0);
        for seq in chunk {
            let enc = encode_sample(seq, topology, cfg.image_h, cfg.image_w, cfg.patch)?;
            let emb = fwd.main_pass(&enc).embedding;
            let values: Vec<f32> = emb.values().iter().map(|&v| Scalar::to_f64(v) as f32).collect();
            if !values.iter().all(|v| v.is_finite()) {
                return Err(EvalError::Data("non-finite embedding".into()));
            }
            out.push(values);
        }
    }
    Ok(out)
}

pub fn embed_sequence(
    model: &Model<f32>,
    seq: &SkeletonSequence,
    topology: &SkeletonTopology,
) -> Result<Vec<f32>, EvalError> {
    Ok(embed_samples(model, &[seq], topology)?.pop().unwrap())
}
