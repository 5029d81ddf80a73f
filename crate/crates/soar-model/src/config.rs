use serde::{Deserialize, Serialize};

use crate::ModelError;

/// Hyperparameters of the three-stream recognition network. `c_dim` must be
/// non-decreasing across stages. `patch` only configures standalone patch
/// serialization; the conv stem fixes the network's token patch at 16
/// (four stride-2 layers).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Per-head query/key width.
    pub d_key: usize,
    /// Attention heads per stage.
    pub n_head: [usize; 3],
    /// Attention blocks per stage.
    pub h_dep: [usize; 3],
    /// Token feature width per stage.
    pub c_dim: [usize; 3],
    pub patch: usize,
    pub image_h: usize,
    pub image_w: usize,
    /// Hidden width of the two-layer embedding head.
    pub emb_hidden: usize,
    /// Output embedding dimension.
    pub emb_dim: usize,
    /// Number of base classes (classifier output width).
    pub class_count: usize,
    pub drop_path: f64,
    /// Skeleton coordinate channels (3 for 3D data, 2 for projections).
    pub in_channels: usize,
}

impl ModelConfig {
    pub fn small(class_count: usize) -> Self {
        ModelConfig {
            d_key: 1,
            n_head: [2, 2, 2],
            h_dep: [2, 4, 4],
            c_dim: [384, 512, 512],
            patch: 8,
            image_h: 64,
            image_w: 64,
            emb_hidden: 512,
            emb_dim: 256,
            class_count,
            drop_path: 0.05,
            in_channels: 3,
        }
    }

    pub fn base(class_count: usize) -> Self {
        ModelConfig {
            d_key: 32,
            n_head: [6, 9, 12],
            h_dep: [4, 4, 4],
            c_dim: [384, 512, 768],
            patch: 8,
            image_h: 64,
            image_w: 64,
            emb_hidden: 512,
            emb_dim: 256,
            class_count,
            drop_path: 0.05,
            in_channels: 3,
        }
    }

    /// Smallest valid configuration; used for gradient checks and smoke
    /// training where wall time matters more than capacity.
    pub fn micro(class_count: usize) -> Self {
        ModelConfig {
            d_key: 2,
            n_head: [1, 1, 1],
            h_dep: [1, 1, 1],
            c_dim: [8, 8, 8],
            patch: 8,
            image_h: 16,
            image_w: 16,
            emb_hidden: 16,
            emb_dim: 16,
            class_count,
            drop_path: 0.0,
            in_channels: 3,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let err = |m: String| Err(ModelError::Config(m));
        if self.c_dim[0] > self.c_dim[1] || self.c_dim[1] > self.c_dim[2] {
            return err(format!("c_dim {:?} must be non-decreasing", self.c_dim));
        }
        if self.c_dim[0] % 8 != 0 || self.c_dim[0] == 0 {
            return err(format!("c_dim[0] = {} must be a positive multiple of 8", self.c_dim[0]));
        }
        for i in 0..3 {
            if self.n_head[i] == 0 || self.h_dep[i] == 0 {
                return err(format!("n_head and h_dep must be >= 1 at stage {i}"));
            }
            if self.c_dim[i] < self.n_head[i] {
                return err(format!("c_dim[{i}] = {} < n_head[{i}] = {}", self.c_dim[i], self.n_head[i]));
            }
        }
        if self.image_h % 16 != 0 || self.image_w % 16 != 0 || self.image_h == 0 {
            return err(format!("image {}x{} must be a multiple of 16", self.image_h, self.image_w));
        }
        if self.patch == 0 || self.image_h % self.patch != 0 || self.image_w % self.patch != 0 {
            return err(format!("patch {} must divide image {}x{}", self.patch, self.image_h, self.image_w));
        }
        if self.d_key == 0 || self.emb_hidden == 0 || self.emb_dim == 0 || self.class_count == 0 {
            return err("d_key, emb_hidden, emb_dim and class_count must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.drop_path) {
            return err(format!("drop_path {} outside [0, 1)", self.drop_path));
        }
        if self.in_channels != 2 && self.in_channels != 3 {
            return err(format!("in_channels {} must be 2 or 3", self.in_channels));
        }
        Ok(())
    }

    /// Token grid (rows, cols) entering each stage. The stem downsamples the
    /// image 16x; each inter-stage shrink halves the grid (ceiling).
    pub fn grids(&self) -> [(usize, usize); 3] {
        let mut g = (self.image_h / 16, self.image_w / 16);
        let mut out = [(0, 0); 3];
        for slot in out.iter_mut() {
            *slot = g;
            g = (g.0.div_ceil(2), g.1.div_ceil(2));
        }
        out
    }

    /// Per-head value width at a stage.
    pub fn v_width(&self, stage: usize) -> usize {
        self.c_dim[stage] / self.n_head[stage]
    }
}
