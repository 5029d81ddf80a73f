use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeomError {
    /// The normal system of a least-squares fit is rank deficient
    /// (coplanar or otherwise degenerate correspondences).
    #[error("singular system: {0}")]
    SingularSystem(String),

    /// Mismatched or insufficient correspondence sets.
    #[error("invalid correspondences: {0}")]
    InvalidCorrespondences(String),

    /// A point sits on (or numerically at) the camera plane and cannot be
    /// projected. Carries the offending point index.
    #[error("point {index} lies on the camera plane (|depth| <= epsilon)")]
    ProjectionUndefined { index: usize },

    /// Fewer than three non-collinear points; no 2D hull exists.
    #[error("degenerate hull: {0}")]
    DegenerateHull(String),
}
