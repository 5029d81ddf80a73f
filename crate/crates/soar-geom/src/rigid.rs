use rand::Rng;

use crate::Point3;

/// Index of the vertical (bottom to up) coordinate.
pub const VERTICAL_AXIS: usize = 1;

/// Rigid placement of a mesh: yaw about the vertical axis (through the
/// origin) followed by a translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidAugment {
    pub yaw: f64,
    pub translation: Point3,
}

impl RigidAugment {
    pub fn identity() -> Self {
        RigidAugment {
            yaw: 0.0,
            translation: [0.0; 3],
        }
    }

    pub fn apply(&self, pts: &[Point3]) -> Vec<Point3> {
        let (s, c) = self.yaw.sin_cos();
        pts.iter()
            .map(|p| {
                [
                    c * p[0] + s * p[2] + self.translation[0],
                    p[1] + self.translation[1],
                    -s * p[0] + c * p[2] + self.translation[2],
                ]
            })
            .collect()
    }
}

fn horizontal_centroid(pts: &[Point3]) -> (f64, f64) {
    let n = pts.len() as f64;
    let (mut x, mut z) = (0.0, 0.0);
    for p in pts {
        x += p[0];
        z += p[2];
    }
    (x / n, z / n)
}

fn min_vertical(pts: &[Point3]) -> f64 {
    pts.iter()
        .map(|p| p[VERTICAL_AXIS])
        .fold(f64::INFINITY, f64::min)
}

/// Computes the placement that yaws the mesh by `yaw`, moves its horizontal
/// centroid to the skeleton's horizontal centroid plus `horizontal_offset`,
/// and shifts it vertically so the mesh minimum matches the skeleton
/// minimum (the object rests at the skeleton's ground level).
///
/// With zero yaw and zero offset this reduces to centering plus vertical
/// alignment only.
pub fn place_mesh(
    mesh: &[Point3],
    skeleton_points: &[Point3],
    yaw: f64,
    horizontal_offset: [f64; 2],
) -> (Vec<Point3>, RigidAugment) {
    assert!(!mesh.is_empty() && !skeleton_points.is_empty());
    let rot = RigidAugment {
        yaw,
        translation: [0.0; 3],
    };
    let rotated = rot.apply(mesh);
    let (mx, mz) = horizontal_centroid(&rotated);
    let (sx, sz) = horizontal_centroid(skeleton_points);
    let translation = [
        sx + horizontal_offset[0] - mx,
        min_vertical(skeleton_points) - min_vertical(&rotated),
        sz + horizontal_offset[1] - mz,
    ];
    let augment = RigidAugment { yaw, translation };
    (augment.apply(mesh), augment)
}

/// Draws a random placement: yaw uniform in [0, 2*pi), horizontal offset
/// uniform over a disc of the given radius around the skeleton centroid,
/// vertical alignment as in `place_mesh`.
pub fn sample_rigid_augment<R: Rng>(
    mesh: &[Point3],
    skeleton_points: &[Point3],
    disc_radius: f64,
    rng: &mut R,
) -> (Vec<Point3>, RigidAugment) {
    let yaw = rng.gen_range(0.0..std::f64::consts::TAU);
    let r = disc_radius * rng.gen_range(0.0f64..1.0).sqrt();
    let theta = rng.gen_range(0.0..std::f64::consts::TAU);
    place_mesh(
        mesh,
        skeleton_points,
        yaw,
        [r * theta.cos(), r * theta.sin()],
    )
}
