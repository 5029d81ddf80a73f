use crate::{GeomError, Point2};

/// Membership tolerance: a point counts as inside when every half-space
/// constraint evaluates to at most this value, so boundary points are in.
pub const HULL_TOLERANCE: f64 = 1e-9;

/// 2D convex hull in two coupled representations: counter-clockwise
/// vertices and outward unit-normal half-spaces (a·p + b <= 0 inside).
#[derive(Debug, Clone)]
pub struct ConvexHull2D {
    /// Counter-clockwise vertex ring, starting at the lexicographic minimum.
    pub vertices: Vec<Point2>,
    /// One (a0, a1, b) triple per edge with unit-norm (a0, a1).
    pub halfspaces: Vec<[f64; 3]>,
}

fn cross(o: Point2, a: Point2, b: Point2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Builds the convex hull of a point set via the monotone chain. Errors
/// when fewer than three distinct non-collinear points are present.
pub fn convex_hull_2d(points: &[Point2]) -> Result<ConvexHull2D, GeomError> {
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|p, q| p.partial_cmp(q).expect("non-finite hull input"));
    pts.dedup();
    if pts.len() < 3 {
        return Err(GeomError::DegenerateHull(format!(
            "{} distinct points",
            pts.len()
        )));
    }

    let mut lower: Vec<Point2> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point2> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    let vertices: Vec<Point2> = lower.into_iter().chain(upper).collect();
    if vertices.len() < 3 {
        return Err(GeomError::DegenerateHull("all points collinear".into()));
    }

    // One outward half-space per directed edge of the CCW ring.
    let n = vertices.len();
    let mut halfspaces = Vec::with_capacity(n);
    for i in 0..n {
        let p = vertices[i];
        let q = vertices[(i + 1) % n];
        let d = [q[0] - p[0], q[1] - p[1]];
        let norm = (d[0] * d[0] + d[1] * d[1]).sqrt();
        // Outward normal of a CCW edge points right of the edge direction.
        let a = [d[1] / norm, -d[0] / norm];
        let b = -(a[0] * p[0] + a[1] * p[1]);
        halfspaces.push([a[0], a[1], b]);
    }
    Ok(ConvexHull2D {
        vertices,
        halfspaces,
    })
}

impl ConvexHull2D {
    /// True when the point satisfies every half-space within the tolerance;
    /// boundary points are inside.
    pub fn contains(&self, p: Point2) -> bool {
        self.contains_with_tolerance(p, HULL_TOLERANCE)
    }

    pub fn contains_with_tolerance(&self, p: Point2, tol: f64) -> bool {
        self.halfspaces
            .iter()
            .all(|h| h[0] * p[0] + h[1] * p[1] + h[2] <= tol)
    }

    /// Arithmetic mean of the hull vertices; strictly interior.
    pub fn centroid(&self) -> Point2 {
        let n = self.vertices.len() as f64;
        let mut c = [0.0, 0.0];
        for v in &self.vertices {
            c[0] += v[0];
            c[1] += v[1];
        }
        [c[0] / n, c[1] / n]
    }

    /// Axis-aligned bounds as (min, max) corners.
    pub fn bounds(&self) -> (Point2, Point2) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for k in 0..2 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::winding_number_contains;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn unit_square_hull() {
        let pts = [
            [0.0, 0.0],
            [1.0, 0.0],
            [1.0, 1.0],
            [0.0, 1.0],
            [0.5, 0.5],
            [0.25, 0.75],
        ];
        let hull = convex_hull_2d(&pts).unwrap();
        assert_eq!(hull.vertices.len(), 4);
        assert!(hull.contains([0.5, 0.5]));
        assert!(hull.contains([0.0, 0.0])); // vertex: boundary is inside
        assert!(hull.contains([0.5, 1.0])); // edge midpoint
        assert!(!hull.contains([1.5, 0.5]));
        assert!(!hull.contains([0.5, -1e-6]));
    }

    #[test]
    fn collinear_points_degenerate() {
        let pts: Vec<Point2> = (0..10).map(|i| [i as f64, 2.0 * i as f64]).collect();
        let err = convex_hull_2d(&pts).unwrap_err();
        assert!(matches!(err, GeomError::DegenerateHull(_)));
    }

    #[test]
    fn duplicate_points_collapse() {
        let pts = [[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 0.0]];
        let hull = convex_hull_2d(&pts).unwrap();
        assert_eq!(hull.vertices.len(), 3);
    }

    #[test]
    fn vertices_satisfy_own_halfspaces() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..50 {
            let pts: Vec<Point2> = (0..40)
                .map(|_| [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)])
                .collect();
            let hull = convex_hull_2d(&pts).unwrap();
            for v in &hull.vertices {
                assert!(hull.contains(*v));
            }
            // The centroid satisfies every constraint with strict margin.
            let c = hull.centroid();
            for h in &hull.halfspaces {
                assert!(h[0] * c[0] + h[1] * c[1] + h[2] < 0.0);
            }
        }
    }

    #[test]
    fn agrees_with_winding_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let pts: Vec<Point2> = (0..25)
            .map(|_| [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
            .collect();
        let hull = convex_hull_2d(&pts).unwrap();
        for _ in 0..2000 {
            let q = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            assert_eq!(
                hull.contains(q),
                winding_number_contains(&hull.vertices, q),
                "disagreement at {q:?}"
            );
        }
    }

    proptest! {
        #[test]
        fn every_input_point_is_inside(
            xs in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..60)
        ) {
            let pts: Vec<Point2> = xs.iter().map(|&(x, y)| [x, y]).collect();
            if let Ok(hull) = convex_hull_2d(&pts) {
                // Scale the tolerance with the data so huge clouds stay robust.
                let tol = 1e-9 * 100.0;
                for p in &pts {
                    prop_assert!(hull.contains_with_tolerance(*p, tol));
                }
                prop_assert!(hull.vertices.iter().all(|v| pts.contains(v)));
            }
        }
    }
}
