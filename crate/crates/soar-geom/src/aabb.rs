use crate::Point3;

/// Axis-aligned 3D bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    /// Tight box around a non-empty point set. Returns None for empty input.
    pub fn from_points(pts: &[Point3]) -> Option<Aabb> {
        let first = *pts.first()?;
        let mut min = first;
        let mut max = first;
        for p in &pts[1..] {
            for k in 0..3 {
                min[k] = min[k].min(p[k]);
                max[k] = max[k].max(p[k]);
            }
        }
        Some(Aabb { min, max })
    }

    /// True when the boxes share any point (touching faces count).
    pub fn intersects(&self, other: &Aabb) -> bool {
        (0..3).all(|k| self.min[k] <= other.max[k] && other.min[k] <= self.max[k])
    }
}
