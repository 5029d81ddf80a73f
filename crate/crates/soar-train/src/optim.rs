use std::collections::BTreeMap;

use soar_grad::Scalar;
use soar_model::{is_learned, Model};

/// Adam with decoupled weight decay. Moments are kept at f64 regardless of
/// the parameter precision so second-moment accumulation never underflows;
/// the decay term multiplies the parameter directly instead of joining the
/// gradient, so it is unaffected by the moment normalization.
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    t: u64,
    m: BTreeMap<String, Vec<f64>>,
    v: BTreeMap<String, Vec<f64>>,
}

impl AdamW {
    pub fn new(weight_decay: f64) -> Self {
        AdamW {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            t: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    /// One update over every learned parameter present in `grads`.
    pub fn step<S: Scalar>(
        &mut self,
        model: &mut Model<S>,
        grads: &BTreeMap<String, Vec<f64>>,
        lr: f64,
    ) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let (beta1, beta2, eps, wd) = (self.beta1, self.beta2, self.eps, self.weight_decay);
        let moments_m = &mut self.m;
        let moments_v = &mut self.v;
        for (name, param) in model.store.iter_mut() {
            if !is_learned(name) {
                continue;
            }
            let Some(g) = grads.get(name) else { continue };
            assert_eq!(g.len(), param.values.len(), "gradient size mismatch for {name}");
            let m = moments_m.entry(name.clone()).or_insert_with(|| vec![0.0; g.len()]);
            let v = moments_v.entry(name.clone()).or_insert_with(|| vec![0.0; g.len()]);
            for i in 0..g.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let step = (m[i] / bc1) / ((v[i] / bc2).sqrt() + eps);
                let p = param.values[i].to_f64();
                param.values[i] = S::from_f64(p - lr * (step + wd * p));
            }
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}
