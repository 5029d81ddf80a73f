use serde::{Deserialize, Serialize};

use crate::DataError;

/// Bone tree over joints: `bones[k] = (child, parent)`, a connected acyclic
/// graph with exactly `joint_count - 1` edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkeletonTopology {
    pub joint_count: usize,
    pub bones: Vec<(usize, usize)>,
}

impl SkeletonTopology {
    /// Deterministic stick-figure tree: joint 0 is the root (pelvis), joint
    /// j hangs off joint (j-1)/2, giving a branching figure for any J >= 2.
    pub fn stick_figure(joint_count: usize) -> Self {
        let bones = (1..joint_count).map(|j| (j, (j - 1) / 2)).collect();
        SkeletonTopology { joint_count, bones }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let j = self.joint_count;
        if j < 2 {
            return Err(DataError::Validation(format!("joint_count {j} < 2")));
        }
        if self.bones.len() != j - 1 {
            return Err(DataError::Validation(format!(
                "{} bones for {} joints (need {})",
                self.bones.len(),
                j,
                j - 1
            )));
        }
        // Union-find connectivity; a tree with J-1 edges and no cycle is
        // connected.
        let mut parent: Vec<usize> = (0..j).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &(a, b) in &self.bones {
            if a == b || a >= j || b >= j {
                return Err(DataError::Validation(format!("bad bone ({a}, {b})")));
            }
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra == rb {
                return Err(DataError::Validation(format!("cycle through bone ({a}, {b})")));
            }
            parent[ra] = rb;
        }
        Ok(())
    }
}

/// One captured sequence: `data` is T x J x B row-major (frame, joint,
/// coordinate); `mask[t*J + j]` true means the joint is occluded and all its
/// coordinates are exactly zero. B = 3 for metric 3D data, B = 2 for pixel
/// data.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSequence {
    pub label: u32,
    pub camera_id: u32,
    pub group_id: u32,
    pub subject_id: u32,
    pub frames: usize,
    pub joints: usize,
    pub channels: usize,
    pub data: Vec<f32>,
    pub mask: Vec<bool>,
}

impl SkeletonSequence {
    pub fn zeros(frames: usize, joints: usize, channels: usize) -> Self {
        SkeletonSequence {
            label: 0,
            camera_id: 0,
            group_id: 0,
            subject_id: 0,
            frames,
            joints,
            channels,
            data: vec![0.0; frames * joints * channels],
            mask: vec![false; frames * joints],
        }
    }

    #[inline]
    pub fn cell(&self, t: usize, j: usize) -> usize {
        t * self.joints + j
    }

    #[inline]
    pub fn offset(&self, t: usize, j: usize) -> usize {
        (t * self.joints + j) * self.channels
    }

    pub fn joint(&self, t: usize, j: usize) -> &[f32] {
        let o = self.offset(t, j);
        &self.data[o..o + self.channels]
    }

    pub fn joint_mut(&mut self, t: usize, j: usize) -> &mut [f32] {
        let o = self.offset(t, j);
        let b = self.channels;
        &mut self.data[o..o + b]
    }

    /// 3D joint position as f64; panics unless B = 3.
    pub fn joint3(&self, t: usize, j: usize) -> [f64; 3] {
        assert_eq!(self.channels, 3);
        let v = self.joint(t, j);
        [v[0] as f64, v[1] as f64, v[2] as f64]
    }

    /// 2D joint position as f64; panics unless B = 2.
    pub fn joint2(&self, t: usize, j: usize) -> [f64; 2] {
        assert_eq!(self.channels, 2);
        let v = self.joint(t, j);
        [v[0] as f64, v[1] as f64]
    }

    pub fn is_masked(&self, t: usize, j: usize) -> bool {
        self.mask[self.cell(t, j)]
    }

    /// Marks one cell occluded: coordinates zeroed, mask set.
    pub fn mask_cell(&mut self, t: usize, j: usize) {
        let c = self.cell(t, j);
        self.mask[c] = true;
        for v in self.joint_mut(t, j) {
            *v = 0.0;
        }
    }

    /// Fraction of masked cells.
    pub fn snr(&self) -> f64 {
        if self.mask.is_empty() {
            return 0.0;
        }
        self.mask.iter().filter(|&&m| m).count() as f64 / self.mask.len() as f64
    }

    /// All unmasked 3D joint positions across frames (B = 3 only).
    pub fn unmasked_points3(&self) -> Vec<[f64; 3]> {
        let mut pts = Vec::new();
        for t in 0..self.frames {
            for j in 0..self.joints {
                if !self.is_masked(t, j) {
                    pts.push(self.joint3(t, j));
                }
            }
        }
        pts
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.frames < 2 || self.joints < 2 {
            return Err(DataError::Validation(format!(
                "T={} J={} below minimums",
                self.frames, self.joints
            )));
        }
        if self.channels != 2 && self.channels != 3 {
            return Err(DataError::Validation(format!("B={} not in {{2,3}}", self.channels)));
        }
        if self.data.len() != self.frames * self.joints * self.channels {
            return Err(DataError::Validation("data length mismatch".into()));
        }
        if self.mask.len() != self.frames * self.joints {
            return Err(DataError::Validation("mask length mismatch".into()));
        }
        for t in 0..self.frames {
            for j in 0..self.joints {
                if self.is_masked(t, j) && self.joint(t, j).iter().any(|&v| v != 0.0) {
                    return Err(DataError::Validation(format!(
                        "masked cell ({t}, {j}) has nonzero coordinates"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub format_version: u32,
    pub frames: usize,
    pub joints: usize,
    pub channels: usize,
    pub camera_count: usize,
    pub class_names: Vec<String>,
    pub topology: SkeletonTopology,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub samples: Vec<SkeletonSequence>,
}

impl Dataset {
    pub fn validate(&self) -> Result<(), DataError> {
        self.meta.topology.validate()?;
        if self.meta.topology.joint_count != self.meta.joints {
            return Err(DataError::Validation("topology joint count != meta joints".into()));
        }
        for (i, s) in self.samples.iter().enumerate() {
            s.validate()
                .map_err(|e| DataError::Validation(format!("sample {i}: {e}")))?;
            if s.frames != self.meta.frames
                || s.joints != self.meta.joints
                || s.channels != self.meta.channels
            {
                return Err(DataError::Validation(format!(
                    "sample {i} shape differs from dataset meta"
                )));
            }
            if (s.label as usize) >= self.meta.class_names.len() {
                return Err(DataError::Validation(format!(
                    "sample {i} label {} out of range",
                    s.label
                )));
            }
            if (s.camera_id as usize) >= self.meta.camera_count {
                return Err(DataError::Validation(format!(
                    "sample {i} camera {} out of range",
                    s.camera_id
                )));
            }
        }
        Ok(())
    }

    /// Indices of samples grouped by group_id, groups in first-appearance
    /// order, members in dataset order.
    pub fn group_indices(&self) -> Vec<Vec<usize>> {
        let mut order: Vec<u32> = Vec::new();
        let mut groups: std::collections::BTreeMap<u32, Vec<usize>> = Default::default();
        for (i, s) in self.samples.iter().enumerate() {
            if !groups.contains_key(&s.group_id) {
                order.push(s.group_id);
            }
            groups.entry(s.group_id).or_default().push(i);
        }
        order.into_iter().map(|g| groups.remove(&g).unwrap()).collect()
    }
}
