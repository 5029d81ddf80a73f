use rand::Rng;
use soar_data::SkeletonSequence;
use soar_geom::{convex_hull_2d, ConvexHull2D, GeomError, DEPTH_EPSILON};

use crate::{OccludeError, OccluderModel};

/// Projection retry budget for the single-sample 2D path; the operator takes
/// no config, so this mirrors the default placement retry budget.
pub const PROJECTION_RETRIES: usize = 25;

/// A 3x4 camera-to-image projection in homogeneous coordinates.
#[derive(Debug, Clone, Copy)]
pub struct Projection2D {
    pub matrix: [[f64; 4]; 3],
}

impl Projection2D {
    /// Builds K[R|t] with focal `f`, principal point `(cx, cy)`, yaw about
    /// the vertical axis, and camera-frame translation `t`.
    pub fn from_intrinsics(f: f64, cx: f64, cy: f64, yaw: f64, t: [f64; 3]) -> Self {
        let (s, c) = yaw.sin_cos();
        // Rows of R for a yaw about axis 1.
        let r = [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]];
        let rt = [
            [r[0][0], r[0][1], r[0][2], t[0]],
            [r[1][0], r[1][1], r[1][2], t[1]],
            [r[2][0], r[2][1], r[2][2], t[2]],
        ];
        let k = [[f, 0.0, cx], [0.0, f, cy], [0.0, 0.0, 1.0]];
        let mut m = [[0.0; 4]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k_| k[i][k_] * rt[k_][j]).sum();
            }
        }
        Projection2D { matrix: m }
    }

    pub fn project(&self, p: [f64; 3]) -> Option<[f64; 2]> {
        let h = [p[0], p[1], p[2], 1.0];
        let dot = |row: &[f64; 4]| row.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>();
        let w = dot(&self.matrix[2]);
        if w.abs() <= DEPTH_EPSILON {
            return None;
        }
        Some([dot(&self.matrix[0]) / w, dot(&self.matrix[1]) / w])
    }
}

/// Projects every occluder vertex through `proj`. A vertex on the camera
/// plane makes the whole projection degenerate.
pub fn project_occluder_2d(
    proj: &Projection2D,
    mesh: &[[f64; 3]],
) -> Result<Vec<[f64; 2]>, OccludeError> {
    mesh.iter()
        .enumerate()
        .map(|(i, &v)| {
            proj.project(v)
                .ok_or_else(|| GeomError::ProjectionUndefined { index: i }.into())
        })
        .collect()
}

/// Masks every currently-unmasked joint of a planar (B=2) sample that falls
/// inside `hull`, and returns the fresh-mask SNR.
pub fn apply_hull_mask_2d(sample: &mut SkeletonSequence, hull: &ConvexHull2D) -> f64 {
    assert_eq!(sample.channels, 2, "hull masking over 2D joints");
    let mut fresh = 0usize;
    for t in 0..sample.frames {
        for j in 0..sample.joints {
            if sample.is_masked(t, j) {
                continue;
            }
            if hull.contains(sample.joint2(t, j)) {
                sample.mask_cell(t, j);
                fresh += 1;
            }
        }
    }
    fresh as f64 / (sample.frames * sample.joints) as f64
}

struct Bbox2 {
    min: [f64; 2],
    max: [f64; 2],
}

fn bbox2(points: &[[f64; 2]]) -> Option<Bbox2> {
    let first = points.first()?;
    let mut bb = Bbox2 { min: *first, max: *first };
    for p in points {
        for a in 0..2 {
            bb.min[a] = bb.min[a].min(p[a]);
            bb.max[a] = bb.max[a].max(p[a]);
        }
    }
    Some(bb)
}

fn overlaps(a: &Bbox2, b: &Bbox2) -> bool {
    (0..2).all(|i| a.min[i] <= b.max[i] && b.min[i] <= a.max[i])
}

/// Occludes a planar sample by projecting a 3D occluder through a random
/// camera. The camera aims at the skeleton: focal in [0.5, 2.0] of the
/// skeleton's image scale, principal point jittered around its centroid,
/// random yaw, mesh centered on the optical axis at a random depth.
/// Projections are redrawn until the hull's bounding box overlaps the
/// skeleton's; exhausting the budget without a usable projection is an
/// error. Returns the fresh-mask SNR.
pub fn occlude_realistic_2d<R: Rng>(
    sample: &mut SkeletonSequence,
    occluder: &OccluderModel,
    rng: &mut R,
) -> Result<f64, OccludeError> {
    if sample.channels != 2 {
        return Err(OccludeError::Config(format!(
            "2D occlusion requires B=2 data, got B={}",
            sample.channels
        )));
    }
    occluder.validate()?;

    let joints: Vec<[f64; 2]> = (0..sample.frames)
        .flat_map(|t| (0..sample.joints).map(move |j| (t, j)))
        .filter(|&(t, j)| !sample.is_masked(t, j))
        .map(|(t, j)| sample.joint2(t, j))
        .collect();
    let Some(skel_bb) = bbox2(&joints) else {
        return Err(OccludeError::Config(
            "sample is fully masked; nothing to occlude".into(),
        ));
    };
    let scale = (skel_bb.max[0] - skel_bb.min[0])
        .max(skel_bb.max[1] - skel_bb.min[1])
        .max(1e-3);
    let centroid = [
        (skel_bb.min[0] + skel_bb.max[0]) / 2.0,
        (skel_bb.min[1] + skel_bb.max[1]) / 2.0,
    ];

    let mesh_centroid = {
        let n = occluder.vertices.len() as f64;
        let mut c = [0.0; 3];
        for v in &occluder.vertices {
            for a in 0..3 {
                c[a] += v[a] / n;
            }
        }
        c
    };
    let centered: Vec<[f64; 3]> = occluder
        .vertices
        .iter()
        .map(|v| [v[0] - mesh_centroid[0], v[1] - mesh_centroid[1], v[2] - mesh_centroid[2]])
        .collect();
    let radius = centered
        .iter()
        .map(|v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt())
        .fold(0.0f64, f64::max)
        .max(1e-3);

    for _ in 0..PROJECTION_RETRIES {
        let f = rng.gen_range(0.5..2.0) * scale;
        let cx = centroid[0] + rng.gen_range(-0.25..0.25) * scale;
        let cy = centroid[1] + rng.gen_range(-0.25..0.25) * scale;
        let yaw = rng.gen_range(0.0..std::f64::consts::TAU);
        let depth = rng.gen_range(1.5..4.0) * radius;
        let proj = Projection2D::from_intrinsics(f, cx, cy, yaw, [0.0, 0.0, depth]);

        let projected = match project_occluder_2d(&proj, &centered) {
            Ok(p) => p,
            Err(OccludeError::Geometry(GeomError::ProjectionUndefined { .. })) => continue,
            Err(e) => return Err(e),
        };
        let hull = match convex_hull_2d(&projected) {
            Ok(h) => h,
            Err(GeomError::DegenerateHull(_)) => continue,
            Err(e) => return Err(e.into()),
        };
        let Some(hull_bb) = bbox2(&hull.vertices) else {
            continue;
        };
        if !overlaps(&hull_bb, &skel_bb) {
            continue;
        }
        return Ok(apply_hull_mask_2d(sample, &hull));
    }
    Err(OccludeError::DegenerateProjection {
        attempts: PROJECTION_RETRIES,
    })
}
