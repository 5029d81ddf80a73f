//! 3D/2D geometry for skeleton capture setups: cross-view affine calibration
//! from joint correspondences, pinhole projection, 2D convex hulls with
//! half-space membership tests, and rigid placement of occluder meshes.
//!
//! Coordinate convention used throughout the workspace: axis 0 is lateral,
//! axis 1 is vertical (bottom to up), axis 2 is the camera focus axis
//! (depth). Projection divides the first two coordinates by the third.

mod aabb;
mod calib;
mod error;
mod hull;
pub mod oracle;
mod project;
mod rigid;

pub use aabb::Aabb;
pub use calib::{estimate_calibration, AffineCalibration};
pub use error::GeomError;
pub use hull::{convex_hull_2d, ConvexHull2D, HULL_TOLERANCE};
pub use project::{perspective_project, project_point, DEPTH_EPSILON};
pub use rigid::{place_mesh, sample_rigid_augment, RigidAugment, VERTICAL_AXIS};

pub type Point3 = [f64; 3];
pub type Point2 = [f64; 2];
