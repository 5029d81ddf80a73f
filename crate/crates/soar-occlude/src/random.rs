use rand::Rng;
use soar_data::SkeletonSequence;

use crate::OccludeError;

/// Draws `k` distinct indices from `0..n` uniformly without replacement
/// (partial Fisher-Yates; order of draws is deterministic given the RNG).
fn sample_distinct<R: Rng>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    debug_assert!(k <= n);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.gen_range(i..n);
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx
}

/// Masks exactly round(gamma * T * J) distinct cells chosen uniformly.
pub fn occlude_random<R: Rng>(
    sample: &mut SkeletonSequence,
    gamma: f64,
    rng: &mut R,
) -> Result<(), OccludeError> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(OccludeError::Config(format!("gamma {gamma} not in (0, 1)")));
    }
    let cells = sample.frames * sample.joints;
    let k = (gamma * cells as f64).round() as usize;
    for cell in sample_distinct(cells, k, rng) {
        sample.mask_cell(cell / sample.joints, cell % sample.joints);
    }
    Ok(())
}

/// Fully zeroes `n_frames` distinct frames.
pub fn occlude_temporal<R: Rng>(
    sample: &mut SkeletonSequence,
    n_frames: usize,
    rng: &mut R,
) -> Result<(), OccludeError> {
    if n_frames >= sample.frames {
        return Err(OccludeError::Config(format!(
            "n_frames {} must be < T = {}",
            n_frames, sample.frames
        )));
    }
    for t in sample_distinct(sample.frames, n_frames, rng) {
        for j in 0..sample.joints {
            sample.mask_cell(t, j);
        }
    }
    Ok(())
}

/// Zeroes an independently drawn set of `n_joints` joints in every frame.
pub fn occlude_spatial<R: Rng>(
    sample: &mut SkeletonSequence,
    n_joints: usize,
    rng: &mut R,
) -> Result<(), OccludeError> {
    if n_joints >= sample.joints {
        return Err(OccludeError::Config(format!(
            "n_joints {} must be < J = {}",
            n_joints, sample.joints
        )));
    }
    for t in 0..sample.frames {
        for j in sample_distinct(sample.joints, n_joints, rng) {
            sample.mask_cell(t, j);
        }
    }
    Ok(())
}
