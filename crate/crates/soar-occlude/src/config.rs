use serde::{Deserialize, Serialize};

use crate::OccludeError;

/// Shared parameter block for every occlusion operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcclusionConfig {
    /// Target per-view SNR interval [a, b] for realistic occlusion.
    pub snr_range: [f64; 2],
    /// Minimum number of views whose SNR must land in the range for a
    /// placement to be accepted.
    pub min_occluded_per_group: usize,
    /// Retry budget for realistic placement.
    pub max_retries: usize,
    /// Masked-cell ratio for random spatiotemporal occlusion.
    pub gamma: f64,
    /// Frame count for temporal occlusion.
    pub n_frames: usize,
    /// Per-frame joint count for spatial occlusion.
    pub n_joints: usize,
    pub seed: u64,
}

impl Default for OcclusionConfig {
    fn default() -> Self {
        OcclusionConfig {
            snr_range: [0.05, 0.35],
            min_occluded_per_group: 1,
            max_retries: 25,
            gamma: 0.1,
            n_frames: 10,
            n_joints: 5,
            seed: 0,
        }
    }
}

impl OcclusionConfig {
    /// Checks the fields that do not depend on sample dimensions; frame and
    /// joint bounds are checked by the operators against T and J.
    pub fn validate(&self) -> Result<(), OccludeError> {
        let [a, b] = self.snr_range;
        if !(0.0 < a && a < b && b < 1.0) {
            return Err(OccludeError::Config(format!(
                "snr_range [{a}, {b}] must satisfy 0 < a < b < 1"
            )));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(OccludeError::Config(format!(
                "gamma {} must lie in (0, 1)",
                self.gamma
            )));
        }
        if self.min_occluded_per_group == 0 {
            return Err(OccludeError::Config(
                "min_occluded_per_group must be >= 1".into(),
            ));
        }
        Ok(())
    }
}
