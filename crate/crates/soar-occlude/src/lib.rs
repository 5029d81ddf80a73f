//! Occlusion synthesis for skeleton sequences: realistic occlusion via
//! projected convex hulls of 3D object meshes (multi-view consistent through
//! estimated cross-camera calibrations, and single-view through random
//! projection matrices), plus random spatiotemporal, temporal and spatial
//! masking, with SNR statistics.

mod calib;
mod config;
mod error;
mod occluders;
mod random;
mod realistic2d;
mod realistic3d;
mod stats;

pub use calib::{estimate_group_calibrations, CalibrationSet};
pub use config::OcclusionConfig;
pub use error::OccludeError;
pub use occluders::{builtin_library, load_occluder, save_occluder, OccluderModel};
pub use random::{occlude_random, occlude_spatial, occlude_temporal};
pub use realistic2d::{
    apply_hull_mask_2d, occlude_realistic_2d, project_occluder_2d, Projection2D,
};
pub use realistic3d::{
    evaluate_occluder_placement, occlude_realistic_3d, OcclusionOutcome, PlacementEval,
    ViewOcclusion,
};
pub use stats::{snr_histogram, snr_of};
