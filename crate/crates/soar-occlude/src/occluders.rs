use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::OccludeError;

/// A rigid 3D object given as a bare vertex cloud in meters. Only the
/// convex hull of its projection matters for occlusion, so no faces are
/// stored.
#[derive(Debug, Clone, PartialEq)]
pub struct OccluderModel {
    pub name: String,
    pub vertices: Vec<[f64; 3]>,
}

impl OccluderModel {
    pub fn validate(&self) -> Result<(), OccludeError> {
        if self.vertices.len() < 4 {
            return Err(OccludeError::Config(format!(
                "occluder '{}' has {} vertices; need >= 4",
                self.name,
                self.vertices.len()
            )));
        }
        if self
            .vertices
            .iter()
            .any(|v| v.iter().any(|x| !x.is_finite()))
        {
            return Err(OccludeError::Config(format!(
                "occluder '{}' has non-finite vertices",
                self.name
            )));
        }
        Ok(())
    }
}

fn box_cloud(name: &str, w: f64, h: f64, d: f64) -> OccluderModel {
    let mut vertices = Vec::with_capacity(8);
    for &x in &[-w / 2.0, w / 2.0] {
        for &y in &[0.0, h] {
            for &z in &[-d / 2.0, d / 2.0] {
                vertices.push([x, y, z]);
            }
        }
    }
    OccluderModel {
        name: name.to_string(),
        vertices,
    }
}

/// Four legs plus a top slab, 24 vertices.
fn table_cloud(name: &str, w: f64, h: f64, d: f64, rng: &mut ChaCha12Rng) -> OccluderModel {
    let mut vertices = Vec::new();
    let leg = 0.05;
    for &sx in &[-1.0, 1.0] {
        for &sz in &[-1.0, 1.0] {
            let cx = sx * (w / 2.0 - leg);
            let cz = sz * (d / 2.0 - leg);
            for &y in &[0.0, h - 0.04] {
                vertices.push([cx - leg, y, cz - leg]);
                vertices.push([cx + leg, y, cz + leg]);
            }
        }
    }
    for &x in &[-w / 2.0, w / 2.0] {
        for &z in &[-d / 2.0, d / 2.0] {
            vertices.push([x, h - 0.04, z]);
            vertices.push([x, h, z]);
        }
    }
    // A little surface clutter so clouds differ between instances.
    for _ in 0..4 {
        vertices.push([
            rng.gen_range(-w / 2.0..w / 2.0),
            h + rng.gen_range(0.0..0.15),
            rng.gen_range(-d / 2.0..d / 2.0),
        ]);
    }
    OccluderModel {
        name: name.to_string(),
        vertices,
    }
}

/// Seat box plus back rest, 16 vertices.
fn chair_cloud(name: &str, w: f64, seat_h: f64, back_h: f64, d: f64) -> OccluderModel {
    let mut vertices = Vec::new();
    for &x in &[-w / 2.0, w / 2.0] {
        for &y in &[0.0, seat_h] {
            for &z in &[-d / 2.0, d / 2.0] {
                vertices.push([x, y, z]);
            }
        }
    }
    for &x in &[-w / 2.0, w / 2.0] {
        for &y in &[seat_h, back_h] {
            vertices.push([x, y, -d / 2.0]);
            vertices.push([x, y, -d / 2.0 + 0.06]);
        }
    }
    OccluderModel {
        name: name.to_string(),
        vertices,
    }
}

/// Deterministic stand-in object library: boxes, tables and chairs of
/// varied extents (8 to 60 vertices each).
pub fn builtin_library(seed: u64) -> Vec<OccluderModel> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut lib = Vec::new();
    for (i, (w, h, d)) in [(0.5, 0.6, 0.4), (0.9, 1.1, 0.5), (1.3, 0.8, 0.7)]
        .iter()
        .enumerate()
    {
        lib.push(box_cloud(&format!("box_{i}"), *w, *h, *d));
    }
    for (i, (w, h, d)) in [(1.2, 0.75, 0.8), (1.6, 0.8, 0.9)].iter().enumerate() {
        lib.push(table_cloud(&format!("table_{i}"), *w, *h, *d, &mut rng));
    }
    for (i, (w, sh, bh, d)) in [(0.5, 0.45, 1.0, 0.5), (0.6, 0.5, 1.2, 0.55)]
        .iter()
        .enumerate()
    {
        lib.push(chair_cloud(&format!("chair_{i}"), *w, *sh, *bh, *d));
    }
    for m in &lib {
        m.validate().expect("builtin occluders are valid");
    }
    lib
}

/// Reads a vertex-list file: one "x y z" float triple per line; blank lines
/// and lines starting with '#' are skipped.
pub fn load_occluder(path: &Path) -> Result<OccluderModel, OccludeError> {
    let text = std::fs::read_to_string(path)?;
    let mut vertices = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(OccludeError::OccluderFile(format!(
                "{}:{}: expected 3 floats, got {}",
                path.display(),
                ln + 1,
                parts.len()
            )));
        }
        let mut v = [0.0f64; 3];
        for (k, p) in parts.iter().enumerate() {
            v[k] = p.parse().map_err(|_| {
                OccludeError::OccluderFile(format!(
                    "{}:{}: bad float '{p}'",
                    path.display(),
                    ln + 1
                ))
            })?;
        }
        vertices.push(v);
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "occluder".into());
    let model = OccluderModel { name, vertices };
    model.validate()?;
    Ok(model)
}

pub fn save_occluder(model: &OccluderModel, path: &Path) -> Result<(), OccludeError> {
    let mut out = String::new();
    for v in &model.vertices {
        out.push_str(&format!("{} {} {}\n", v[0], v[1], v[2]));
    }
    std::fs::write(path, out)?;
    Ok(())
}
