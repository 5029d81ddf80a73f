use rand::Rng;
use soar_data::SkeletonSequence;

/// Adds i.i.d. N(mu, sigma^2) noise to every coordinate of every unmasked
/// cell. Masked cells stay exactly zero. Box-Muller on the uniform
/// generator, matching the parameter-init idiom elsewhere in the workspace.
pub fn add_gaussian_noise<R: Rng>(seq: &mut SkeletonSequence, sigma: f64, mu: f64, rng: &mut R) {
    assert!(sigma >= 0.0, "sigma must be non-negative, got {sigma}");
    if sigma == 0.0 && mu == 0.0 {
        // Adding literal 0.0 would still flip -0.0 to +0.0; skip to keep the
        // zero-noise path bit-identical.
        return;
    }
    for t in 0..seq.frames {
        for j in 0..seq.joints {
            if seq.is_masked(t, j) {
                continue;
            }
            for v in seq.joint_mut(t, j) {
                let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
                let u2: f64 = rng.gen_range(0.0..1.0);
                let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
                *v = (*v as f64 + mu + sigma * z) as f32;
            }
        }
    }
}
