use rand::Rng;
use soar_data::SkeletonSequence;
use soar_geom::{
    convex_hull_2d, perspective_project, project_point, sample_rigid_augment, Aabb, GeomError,
};

use crate::{CalibrationSet, OccludeError, OccluderModel, OcclusionConfig};

/// Result of testing one mesh placement against one view.
#[derive(Debug, Clone)]
pub struct ViewOcclusion {
    /// Fraction of this view's cells newly inside the projected hull.
    pub snr: f64,
    /// Fresh (frame, joint) cells to mask.
    pub cells: Vec<(usize, usize)>,
}

/// Per-view evaluation of one placement, parallel to the group order.
#[derive(Debug, Clone)]
pub struct PlacementEval {
    pub per_view: Vec<ViewOcclusion>,
}

/// Per-sample outcome of the 3D realistic occlusion pass.
#[derive(Debug, Clone)]
pub struct OcclusionOutcome {
    /// Fresh-occlusion SNR of this view.
    pub snr: f64,
    /// Whether this view's SNR landed inside the configured range.
    pub in_range: bool,
    /// Whether the group met the acceptance rule before retry exhaustion;
    /// false means the best-scoring attempt was kept instead.
    pub group_accepted: bool,
    /// Placement attempts consumed (valid and invalid).
    pub attempts: usize,
    /// Name of the occluder that produced the final masks.
    pub occluder: String,
}

/// Tests one placed mesh (vertices in the frame of `group[0]`'s camera)
/// against every view. Returns `Ok(None)` when the placement is rejected
/// because the mesh bounding box intersects a skeleton bounding box in some
/// view. Unprojectable meshes and degenerate hulls surface as geometry
/// errors, which the retry loop treats as invalid attempts.
pub fn evaluate_occluder_placement(
    group: &[&SkeletonSequence],
    calibrations: &CalibrationSet,
    placed_mesh: &[[f64; 3]],
) -> Result<Option<PlacementEval>, OccludeError> {
    let ref_cam = group[0].camera_id;
    let mut per_view = Vec::with_capacity(group.len());
    for sample in group {
        let mesh_view: Vec<[f64; 3]> = if sample.camera_id == ref_cam {
            placed_mesh.to_vec()
        } else {
            calibrations
                .get(&(ref_cam, sample.camera_id))
                .ok_or(OccludeError::MissingCalibration {
                    from: ref_cam,
                    to: sample.camera_id,
                })?
                .apply_all(placed_mesh)
        };

        let skel_pts = sample.unmasked_points3();
        if let (Some(skel_box), Some(mesh_box)) =
            (Aabb::from_points(&skel_pts), Aabb::from_points(&mesh_view))
        {
            if mesh_box.intersects(&skel_box) {
                return Ok(None);
            }
        }

        let projected = perspective_project(&mesh_view)?;
        let hull = convex_hull_2d(&projected)?;

        let mut cells = Vec::new();
        for t in 0..sample.frames {
            for j in 0..sample.joints {
                if sample.is_masked(t, j) {
                    continue;
                }
                let p = sample.joint3(t, j);
                // Joints on the camera plane cannot be resolved against the
                // hull; they stay visible.
                let Ok(p2) = project_point(p, t * sample.joints + j) else {
                    continue;
                };
                if hull.contains(p2) {
                    cells.push((t, j));
                }
            }
        }
        let snr = cells.len() as f64 / (sample.frames * sample.joints) as f64;
        per_view.push(ViewOcclusion { snr, cells });
    }
    Ok(Some(PlacementEval { per_view }))
}

fn apply_eval(group: &mut [SkeletonSequence], eval: &PlacementEval) {
    for (sample, view) in group.iter_mut().zip(&eval.per_view) {
        for &(t, j) in &view.cells {
            sample.mask_cell(t, j);
        }
    }
}

/// Distance from an SNR value to the closed interval [a, b]; zero inside.
fn range_distance(snr: f64, a: f64, b: f64) -> f64 {
    if snr < a {
        a - snr
    } else if snr > b {
        snr - b
    } else {
        0.0
    }
}

fn horizontal_half_diagonal(pts: &[[f64; 3]]) -> f64 {
    let Some(bb) = Aabb::from_points(pts) else {
        return 0.0;
    };
    let dx = (bb.max[0] - bb.min[0]) / 2.0;
    let dz = (bb.max[2] - bb.min[2]) / 2.0;
    (dx * dx + dz * dz).sqrt()
}

/// Occludes one simultaneous multi-view group with a randomly selected,
/// randomly placed 3D object. A placement is valid when its bounding box is
/// disjoint from every view's skeleton box and its vertices project to a
/// proper hull in every view. The group is accepted as soon as at least
/// `min_occluded_per_group` views have hull-mask SNR inside `snr_range`;
/// after `max_retries` placements the best-scoring valid attempt (smallest
/// mean distance to the range) is applied instead.
pub fn occlude_realistic_3d<R: Rng>(
    group: &mut [SkeletonSequence],
    calibrations: &CalibrationSet,
    occluders: &[OccluderModel],
    config: &OcclusionConfig,
    rng: &mut R,
) -> Result<Vec<OcclusionOutcome>, OccludeError> {
    config.validate()?;
    if group.is_empty() {
        return Err(OccludeError::Config("empty group".into()));
    }
    if occluders.is_empty() {
        return Err(OccludeError::Config("empty occluder library".into()));
    }
    for s in group.iter() {
        if s.channels != 3 {
            return Err(OccludeError::Config(format!(
                "3D occlusion requires B=3 data, got B={}",
                s.channels
            )));
        }
        if s.group_id != group[0].group_id {
            return Err(OccludeError::Config("samples are not one group".into()));
        }
    }

    let ref_skel = group[0].unmasked_points3();
    if ref_skel.is_empty() {
        return Err(OccludeError::Config(
            "reference view is fully masked; nothing to place against".into(),
        ));
    }
    let skel_half = horizontal_half_diagonal(&ref_skel);

    let [a, b] = config.snr_range;
    let mut best: Option<(f64, PlacementEval, String)> = None;
    let mut attempts = 0usize;

    for _ in 0..config.max_retries {
        attempts += 1;
        let occ = &occluders[rng.gen_range(0..occluders.len())];
        // Roam a disc wide enough to reach depth-disjoint spots in front of
        // or behind the skeleton from any camera.
        let disc = 1.5 * (skel_half + horizontal_half_diagonal(&occ.vertices));
        let (placed, _aug) = sample_rigid_augment(&occ.vertices, &ref_skel, disc, rng);

        let group_view: Vec<&SkeletonSequence> = group.iter().collect();
        let eval = match evaluate_occluder_placement(&group_view, calibrations, &placed) {
            Ok(Some(eval)) => eval,
            Ok(None) => continue,
            Err(OccludeError::Geometry(GeomError::ProjectionUndefined { .. }))
            | Err(OccludeError::Geometry(GeomError::DegenerateHull(_))) => continue,
            Err(e) => return Err(e),
        };

        let in_range = eval
            .per_view
            .iter()
            .filter(|v| a <= v.snr && v.snr <= b)
            .count();
        if in_range >= config.min_occluded_per_group {
            apply_eval(group, &eval);
            return Ok(outcomes(&eval, a, b, true, attempts, occ.name.clone()));
        }
        let dist =
            eval.per_view.iter().map(|v| range_distance(v.snr, a, b)).sum::<f64>()
                / eval.per_view.len() as f64;
        if best.as_ref().map_or(true, |(d, _, _)| dist < *d) {
            best = Some((dist, eval, occ.name.clone()));
        }
    }

    match best {
        Some((_, eval, name)) => {
            apply_eval(group, &eval);
            Ok(outcomes(&eval, a, b, false, attempts, name))
        }
        None => Err(OccludeError::NoValidPlacement { attempts }),
    }
}

fn outcomes(
    eval: &PlacementEval,
    a: f64,
    b: f64,
    group_accepted: bool,
    attempts: usize,
    occluder: String,
) -> Vec<OcclusionOutcome> {
    eval.per_view
        .iter()
        .map(|v| OcclusionOutcome {
            snr: v.snr,
            in_range: a <= v.snr && v.snr <= b,
            group_accepted,
            attempts,
            occluder: occluder.clone(),
        })
        .collect()
}
