use std::collections::BTreeMap;

use soar_data::SkeletonSequence;
use soar_geom::{estimate_calibration, AffineCalibration};

use crate::OccludeError;

/// Affine maps between camera frames, keyed by (from_camera, to_camera).
pub type CalibrationSet = BTreeMap<(u32, u32), AffineCalibration>;

/// Estimates every ordered camera-pair calibration inside one simultaneous
/// capture group from its joint correspondences, using only cells that are
/// unmasked in both views. Identity maps are included for (k, k).
pub fn estimate_group_calibrations(
    group: &[&SkeletonSequence],
) -> Result<CalibrationSet, OccludeError> {
    let mut set = CalibrationSet::new();
    for a in group {
        set.insert(
            (a.camera_id, a.camera_id),
            AffineCalibration::identity(),
        );
        for b in group {
            if a.camera_id == b.camera_id {
                continue;
            }
            let mut src = Vec::new();
            let mut dst = Vec::new();
            for t in 0..a.frames {
                for j in 0..a.joints {
                    if !a.is_masked(t, j) && !b.is_masked(t, j) {
                        src.push(a.joint3(t, j));
                        dst.push(b.joint3(t, j));
                    }
                }
            }
            let (cal, _rms) = estimate_calibration(&src, &dst)?;
            set.insert((a.camera_id, b.camera_id), cal);
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use soar_data::{synth_dataset, SynthConfig};

    #[test]
    fn estimated_maps_match_ground_truth() {
        let out = synth_dataset(&SynthConfig {
            classes: 2,
            samples_per_class: 1,
            cameras: 3,
            frames: 8,
            joints: 11,
            seed: 77,
        })
        .unwrap();
        let groups = out.dataset.group_indices();
        let group: Vec<&SkeletonSequence> =
            groups[0].iter().map(|&i| &out.dataset.samples[i]).collect();
        let set = estimate_group_calibrations(&group).unwrap();
        // Ground truth between camera frames i -> j is T_j composed with
        // T_i^{-1}.
        for a in &group {
            for b in &group {
                let est = &set[&(a.camera_id, b.camera_id)];
                let truth = out.camera_transforms[b.camera_id as usize]
                    .compose(
                        &out.camera_transforms[a.camera_id as usize]
                            .inverse()
                            .unwrap(),
                    );
                for i in 0..4 {
                    for j in 0..4 {
                        assert!(
                            (est.matrix[i][j] - truth.matrix[i][j]).abs() < 1e-4,
                            "cameras {}->{} entry ({i},{j})",
                            a.camera_id,
                            b.camera_id
                        );
                    }
                }
            }
        }
    }
}
