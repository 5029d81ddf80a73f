//! End-to-end occlusion behavior on synthetic multi-view groups: the 3D
//! operator's acceptance rule, determinism, mask-zero coupling, and the
//! cross-view consistency of occluder placement through estimated (not
//! ground-truth) calibrations.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use soar_data::{synth_dataset, SkeletonSequence, SynthConfig};
use soar_geom::place_mesh;
use soar_occlude::{
    builtin_library, estimate_group_calibrations, occlude_realistic_3d, OccludeError,
    OccluderModel, OcclusionConfig,
};

fn synth_groups(seed: u64) -> Vec<Vec<SkeletonSequence>> {
    let out = synth_dataset(&SynthConfig {
        classes: 4,
        samples_per_class: 3,
        cameras: 3,
        frames: 12,
        joints: 15,
        seed,
    })
    .unwrap();
    out.dataset
        .group_indices()
        .iter()
        .map(|idx| idx.iter().map(|&i| out.dataset.samples[i].clone()).collect())
        .collect()
}

#[test]
fn realistic_3d_groups_respect_acceptance_rule() {
    let groups = synth_groups(5);
    let occluders = builtin_library(9);
    let config = OcclusionConfig::default();
    let mut accepted_groups = 0usize;

    for (g, group) in groups.into_iter().enumerate() {
        let originals = group.clone();
        let refs: Vec<&SkeletonSequence> = group.iter().collect();
        let calib = estimate_group_calibrations(&refs).unwrap();
        drop(refs);

        let mut occluded = group;
        let mut rng = ChaCha12Rng::seed_from_u64(1000 + g as u64);
        let outcomes =
            occlude_realistic_3d(&mut occluded, &calib, &occluders, &config, &mut rng).unwrap();

        assert_eq!(outcomes.len(), occluded.len());
        let [a, b] = config.snr_range;
        for (sample, outcome) in occluded.iter().zip(&outcomes) {
            sample.validate().unwrap();
            assert!((sample.snr() - outcome.snr).abs() < 1e-12);
            assert_eq!(outcome.in_range, a <= outcome.snr && outcome.snr <= b);
            assert!(outcome.attempts >= 1 && outcome.attempts <= config.max_retries);
        }
        if outcomes[0].group_accepted {
            accepted_groups += 1;
            let in_range = outcomes.iter().filter(|o| o.in_range).count();
            assert!(in_range >= config.min_occluded_per_group);
        }

        // Unmasked coordinates are bit-identical to the input.
        for (before, after) in originals.iter().zip(&occluded) {
            for t in 0..after.frames {
                for j in 0..after.joints {
                    if !after.is_masked(t, j) {
                        assert_eq!(before.joint(t, j), after.joint(t, j));
                    }
                }
            }
        }

        // Same seed, same input: bit-identical result.
        let mut again = originals;
        let mut rng2 = ChaCha12Rng::seed_from_u64(1000 + g as u64);
        let outcomes2 =
            occlude_realistic_3d(&mut again, &calib, &occluders, &config, &mut rng2).unwrap();
        for (x, y) in occluded.iter().zip(&again) {
            assert_eq!(x.data, y.data);
            assert_eq!(x.mask, y.mask);
        }
        assert_eq!(outcomes.len(), outcomes2.len());
    }
    assert!(accepted_groups > 0, "no group ever met the acceptance rule");
}

#[test]
fn occluder_maps_consistently_through_estimated_calibrations() {
    let groups = synth_groups(17);
    let occluders = builtin_library(3);

    for group in groups.iter().take(4) {
        let refs: Vec<&SkeletonSequence> = group.iter().collect();
        let calib = estimate_group_calibrations(&refs).unwrap();
        let cams: Vec<u32> = group.iter().map(|s| s.camera_id).collect();

        let skel = group[0].unmasked_points3();
        for occ in occluders.iter().take(3) {
            let (placed, _) = place_mesh(&occ.vertices, &skel, 0.7, [1.1, -0.8]);

            // The vertex set each view works with is the reference placement
            // pushed through that view's estimated calibration.
            let per_view: Vec<Vec<[f64; 3]>> = cams
                .iter()
                .map(|&c| calib[&(cams[0], c)].apply_all(&placed))
                .collect();

            // Any two views must agree through the directly estimated map
            // between them, not just through the reference.
            let mut worst = 0.0f64;
            for (di, &d) in cams.iter().enumerate() {
                for (ei, &e) in cams.iter().enumerate() {
                    let mapped = calib[&(d, e)].apply_all(&per_view[di]);
                    for (m, v) in mapped.iter().zip(&per_view[ei]) {
                        for ax in 0..3 {
                            worst = worst.max((m[ax] - v[ax]).abs());
                        }
                    }
                }
            }
            assert!(
                worst <= 1e-6,
                "estimated-calibration disagreement {worst:.3e} for {}",
                occ.name
            );
        }
    }
}

#[test]
fn impossible_placement_reports_no_valid_placement() {
    let groups = synth_groups(23);
    let mut group = groups.into_iter().next().unwrap();
    let refs: Vec<&SkeletonSequence> = group.iter().collect();
    let calib = estimate_group_calibrations(&refs).unwrap();
    drop(refs);

    // A vertical segment shares one (x, z) across all vertices, so in the
    // reference view it projects to exactly collinear points: every attempt
    // either intersects the skeleton box or degenerates at the hull step.
    let pole = OccluderModel {
        name: "pole".into(),
        vertices: vec![
            [0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 2.0, 0.0],
            [0.0, 3.0, 0.0],
        ],
    };
    let config = OcclusionConfig::default();
    let mut rng = ChaCha12Rng::seed_from_u64(0);
    let err = occlude_realistic_3d(&mut group, &calib, &[pole], &config, &mut rng).unwrap_err();
    match err {
        OccludeError::NoValidPlacement { attempts } => {
            assert_eq!(attempts, config.max_retries)
        }
        other => panic!("expected NoValidPlacement, got {other}"),
    }
}

#[test]
fn missing_calibration_is_a_configuration_error() {
    let groups = synth_groups(29);
    let mut group = groups.into_iter().next().unwrap();
    let calib = soar_occlude::CalibrationSet::new();
    let occluders = builtin_library(1);
    let mut rng = ChaCha12Rng::seed_from_u64(4);
    let err = occlude_realistic_3d(
        &mut group,
        &calib,
        &occluders,
        &OcclusionConfig::default(),
        &mut rng,
    )
    .unwrap_err();
    assert!(matches!(err, OccludeError::MissingCalibration { .. }));
}
