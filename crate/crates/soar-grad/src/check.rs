use crate::{Graph, Tensor};

pub const GRAD_CHECK_EPS: f64 = 1e-5;

/// Compares reverse-mode gradients of a scalar-valued function against
/// central finite differences at f64, returning the worst relative error
/// with denominator max(1, |analytic|, |numeric|). The closure must be
/// deterministic: it is re-invoked once per perturbed coordinate.
pub fn grad_check<F>(f: F, inputs: &[(Vec<usize>, Vec<f64>)], eps: f64) -> f64
where
    F: Fn(&Graph<f64>, &[Tensor<f64>]) -> Tensor<f64>,
{
    assert!(eps > 0.0);
    let evaluate = |points: &[Vec<f64>]| -> f64 {
        let g = Graph::new();
        let leaves: Vec<Tensor<f64>> = inputs
            .iter()
            .zip(points)
            .map(|((shape, _), vals)| g.leaf(shape, vals.clone()))
            .collect();
        let out = f(&g, &leaves);
        out.scalar_value()
    };

    // One reverse sweep for all analytic gradients.
    let graph = Graph::new();
    let leaves: Vec<Tensor<f64>> = inputs
        .iter()
        .map(|(shape, vals)| graph.leaf(shape, vals.clone()))
        .collect();
    let out = f(&graph, &leaves);
    out.backward();
    let analytic: Vec<Vec<f64>> = leaves
        .iter()
        .zip(inputs)
        .map(|(t, (_, vals))| t.grad().unwrap_or_else(|| vec![0.0; vals.len()]))
        .collect();

    let mut points: Vec<Vec<f64>> = inputs.iter().map(|(_, v)| v.clone()).collect();
    let mut worst = 0.0f64;
    for i in 0..inputs.len() {
        for j in 0..inputs[i].1.len() {
            let orig = points[i][j];
            points[i][j] = orig + eps;
            let fp = evaluate(&points);
            points[i][j] = orig - eps;
            let fm = evaluate(&points);
            points[i][j] = orig;
            let numeric = (fp - fm) / (2.0 * eps);
            let a = analytic[i][j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1.0);
            worst = worst.max(rel);
        }
    }
    worst
}
