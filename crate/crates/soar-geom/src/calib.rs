use nalgebra::{DMatrix, DVector};

use crate::{GeomError, Point3};

/// Relative singular-value cutoff below which the least-squares design
/// matrix is treated as rank deficient.
const RANK_TOLERANCE: f64 = 1e-10;

/// Affine map between two camera coordinate frames, stored as a 4x4
/// homogeneous matrix whose last row is exactly (0, 0, 0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct AffineCalibration {
    pub matrix: [[f64; 4]; 4],
}

impl AffineCalibration {
    pub fn identity() -> Self {
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Self { matrix: m }
    }

    /// Builds a rigid map: yaw rotation about the vertical axis followed by
    /// a translation. Useful for constructing ground-truth camera frames.
    pub fn rigid(yaw: f64, translation: Point3) -> Self {
        let (s, c) = yaw.sin_cos();
        // Rotation about axis 1 (vertical): mixes axes 0 and 2.
        let mut m = [[0.0; 4]; 4];
        m[0][0] = c;
        m[0][2] = s;
        m[1][1] = 1.0;
        m[2][0] = -s;
        m[2][2] = c;
        m[3][3] = 1.0;
        m[0][3] = translation[0];
        m[1][3] = translation[1];
        m[2][3] = translation[2];
        Self { matrix: m }
    }

    /// Applies the map to a single point.
    pub fn apply(&self, p: Point3) -> Point3 {
        let m = &self.matrix;
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate() {
            *o = m[i][0] * p[0] + m[i][1] * p[1] + m[i][2] * p[2] + m[i][3];
        }
        out
    }

    /// Applies the map to every point in a slice.
    pub fn apply_all(&self, pts: &[Point3]) -> Vec<Point3> {
        pts.iter().map(|&p| self.apply(p)).collect()
    }

    /// Composition: `self.compose(&g)` maps p to self(g(p)).
    pub fn compose(&self, g: &AffineCalibration) -> AffineCalibration {
        let a = &self.matrix;
        let b = &g.matrix;
        let mut m = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = 0.0;
                for (k, bk) in b.iter().enumerate() {
                    acc += a[i][k] * bk[j];
                }
                m[i][j] = acc;
            }
        }
        AffineCalibration { matrix: m }
    }

    /// Inverts the affine map. Errors when the linear part is singular.
    pub fn inverse(&self) -> Result<AffineCalibration, GeomError> {
        let m = nalgebra::Matrix4::from_fn(|i, j| self.matrix[i][j]);
        let inv = m
            .try_inverse()
            .ok_or_else(|| GeomError::SingularSystem("affine map is not invertible".into()))?;
        let mut out = [[0.0; 4]; 4];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = inv[(i, j)];
            }
        }
        // Clamp the homogeneous row back to exact constants.
        out[3] = [0.0, 0.0, 0.0, 1.0];
        Ok(AffineCalibration { matrix: out })
    }
}

/// Fits the affine map that carries `src` points onto `dst` points in the
/// least-squares sense, using homogeneous coordinates (12 free parameters).
///
/// Returns the calibration together with the residual RMS over all
/// coordinate entries. Requires at least four correspondences spanning a
/// non-degenerate (non-coplanar) configuration; otherwise the system is
/// singular and an error is returned.
pub fn estimate_calibration(
    src: &[Point3],
    dst: &[Point3],
) -> Result<(AffineCalibration, f64), GeomError> {
    if src.len() != dst.len() {
        return Err(GeomError::InvalidCorrespondences(format!(
            "source has {} points, target has {}",
            src.len(),
            dst.len()
        )));
    }
    let m = src.len();
    if m < 4 {
        return Err(GeomError::InvalidCorrespondences(format!(
            "need at least 4 correspondences, got {m}"
        )));
    }

    // Design matrix of homogeneous source points, one row per point.
    let x = DMatrix::from_fn(m, 4, |r, c| if c < 3 { src[r][c] } else { 1.0 });

    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin / smax < RANK_TOLERANCE {
        return Err(GeomError::SingularSystem(format!(
            "correspondences are degenerate (singular value ratio {:.3e})",
            if smax > 0.0 { smin / smax } else { 0.0 }
        )));
    }

    // Solve one least-squares column per target coordinate.
    let mut g = [[0.0; 3]; 4]; // g[row][coord]
    let mut sq_residual = 0.0;
    for coord in 0..3 {
        let y = DVector::from_fn(m, |r, _| dst[r][coord]);
        let sol = svd
            .solve(&y, 0.0)
            .map_err(|e| GeomError::SingularSystem(e.to_string()))?;
        for (row, grow) in g.iter_mut().enumerate() {
            grow[coord] = sol[row];
        }
        let resid = &x * &sol - y;
        sq_residual += resid.norm_squared();
    }
    let rms = (sq_residual / (m as f64 * 3.0)).sqrt();

    // Transpose the solution into the row-acting homogeneous form.
    let mut matrix = [[0.0; 4]; 4];
    for (i, row) in matrix.iter_mut().take(3).enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = g[j][i];
        }
    }
    matrix[3] = [0.0, 0.0, 0.0, 1.0];
    Ok((AffineCalibration { matrix }, rms))
}
