//! Verification oracles kept independent of the production geometry paths.
//! Tests compare the half-space membership implementation against the
//! winding-number route below; neither shares code with the other.

use crate::Point2;

/// Winding-number membership for a simple polygon given as a vertex ring.
/// Sums the signed angles subtended by consecutive vertices; interior
/// points accumulate +-2*pi, exterior points cancel to zero.
pub fn winding_number_contains(polygon: &[Point2], p: Point2) -> bool {
    let n = polygon.len();
    if n < 3 {
        return false;
    }
    let mut total = 0.0f64;
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        let va = [a[0] - p[0], a[1] - p[1]];
        let vb = [b[0] - p[0], b[1] - p[1]];
        let cross = va[0] * vb[1] - va[1] * vb[0];
        let dot = va[0] * vb[0] + va[1] * vb[1];
        // Query point exactly on a vertex: treat as inside.
        if va[0] == 0.0 && va[1] == 0.0 {
            return true;
        }
        total += cross.atan2(dot);
    }
    total.abs() > std::f64::consts::PI
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_membership() {
        let square = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert!(winding_number_contains(&square, [0.5, 0.5]));
        assert!(!winding_number_contains(&square, [1.5, 0.5]));
        assert!(!winding_number_contains(&square, [-0.1, -0.1]));
        assert!(winding_number_contains(&square, [0.0, 0.0]));
    }
}
