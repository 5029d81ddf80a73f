use crate::{GeomError, Point2, Point3};

/// Depth magnitudes at or below this value make the perspective divide
/// numerically undefined.
pub const DEPTH_EPSILON: f64 = 1e-6;

/// Projects one point along the focus axis: (x0, x1, x2) -> (x0/x2, x1/x2).
pub fn project_point(p: Point3, index: usize) -> Result<Point2, GeomError> {
    if p[2].abs() <= DEPTH_EPSILON {
        return Err(GeomError::ProjectionUndefined { index });
    }
    Ok([p[0] / p[2], p[1] / p[2]])
}

/// Projects a batch of points, failing on the first point whose depth
/// magnitude is at or below `DEPTH_EPSILON`.
pub fn perspective_project(pts: &[Point3]) -> Result<Vec<Point2>, GeomError> {
    pts.iter()
        .enumerate()
        .map(|(i, &p)| project_point(p, i))
        .collect()
}
