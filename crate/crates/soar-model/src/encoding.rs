//! Skeleton streams and their image encodings: per-joint velocities, bone
//! vectors along the topology, corner-aligned bilinear resampling of a
//! T x K x B stream onto an H x W x B image, and non-overlapping patch
//! flattening. Occluded (zeroed) cells are resampled as ordinary zeros.

use soar_data::{SkeletonSequence, SkeletonTopology};

use crate::ModelError;

/// One sample's three stream images, stored channel-planar ([B][H][W]) for
/// direct convolution ingestion.
#[derive(Debug, Clone)]
pub struct EncodedSample {
    pub joints: Vec<f64>,
    pub velocities: Vec<f64>,
    pub bones: Vec<f64>,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub patch: usize,
}

/// Per-joint frame differences: v_0 = 0, v_t = s_t - s_{t-1}. Layout
/// matches the input sequence ([T][J][B]).
pub fn velocities(seq: &SkeletonSequence) -> Vec<f64> {
    assert!(seq.frames >= 2, "velocities need at least two frames");
    let (t_len, j_len, b_len) = (seq.frames, seq.joints, seq.channels);
    let mut out = vec![0.0f64; t_len * j_len * b_len];
    for t in 1..t_len {
        for j in 0..j_len {
            for b in 0..b_len {
                let cur = seq.data[(t * j_len + j) * b_len + b] as f64;
                let prev = seq.data[((t - 1) * j_len + j) * b_len + b] as f64;
                out[(t * j_len + j) * b_len + b] = cur - prev;
            }
        }
    }
    out
}

/// Per-frame bone vectors, one per topology edge in edge order:
/// b = s_child - s_parent. Layout [T][edges][B].
pub fn bones(seq: &SkeletonSequence, topology: &SkeletonTopology) -> Vec<f64> {
    assert_eq!(topology.joint_count, seq.joints, "topology joint count");
    let (t_len, j_len, b_len) = (seq.frames, seq.joints, seq.channels);
    let edges = &topology.bones;
    let mut out = vec![0.0f64; t_len * edges.len() * b_len];
    for t in 0..t_len {
        for (e, &(child, parent)) in edges.iter().enumerate() {
            for b in 0..b_len {
                let c = seq.data[(t * j_len + child) * b_len + b] as f64;
                let p = seq.data[(t * j_len + parent) * b_len + b] as f64;
                out[(t * edges.len() + e) * b_len + b] = c - p;
            }
        }
    }
    out
}

/// Corner-aligned bilinear resampling of a [T][K][B] stream onto a
/// channel-planar [B][H][W] image: output corners sample input corners,
/// interior positions interpolate the four surrounding grid cells. Linear
/// in the input by construction.
pub fn to_image(stream: &[f64], t_len: usize, k_len: usize, b_len: usize, h: usize, w: usize) -> Vec<f64> {
    assert_eq!(stream.len(), t_len * k_len * b_len, "stream length");
    assert!(t_len >= 1 && k_len >= 1 && h >= 1 && w >= 1);
    let src_coord = |i: usize, out_len: usize, in_len: usize| -> f64 {
        if out_len <= 1 || in_len <= 1 {
            0.0
        } else {
            i as f64 * (in_len - 1) as f64 / (out_len - 1) as f64
        }
    };
    let mut out = vec![0.0f64; b_len * h * w];
    for b in 0..b_len {
        for y in 0..h {
            let ty = src_coord(y, h, t_len);
            let t0 = (ty.floor() as usize).min(t_len - 1);
            let t1 = (t0 + 1).min(t_len - 1);
            let fy = ty - t0 as f64;
            for x in 0..w {
                let kx = src_coord(x, w, k_len);
                let k0 = (kx.floor() as usize).min(k_len - 1);
                let k1 = (k0 + 1).min(k_len - 1);
                let fx = kx - k0 as f64;
                let at = |t: usize, k: usize| stream[(t * k_len + k) * b_len + b];
                let top = at(t0, k0) * (1.0 - fx) + at(t0, k1) * fx;
                let bot = at(t1, k0) * (1.0 - fx) + at(t1, k1) * fx;
                out[(b * h + y) * w + x] = top * (1.0 - fy) + bot * fy;
            }
        }
    }
    out
}

/// Splits a channel-planar [B][H][W] image into non-overlapping P x P
/// patches in row-major grid order, each flattened as [py][px][b]. Returns
/// rows of length P*P*B, (H/P)*(W/P) of them.
pub fn to_patches(image: &[f64], h: usize, w: usize, b_len: usize, p: usize) -> Vec<Vec<f64>> {
    assert!(p >= 1 && h % p == 0 && w % p == 0, "H and W must be multiples of P");
    assert_eq!(image.len(), b_len * h * w, "image length");
    let (gh, gw) = (h / p, w / p);
    let mut patches = Vec::with_capacity(gh * gw);
    for gy in 0..gh {
        for gx in 0..gw {
            let mut flat = Vec::with_capacity(p * p * b_len);
            for py in 0..p {
                for px in 0..p {
                    for b in 0..b_len {
                        flat.push(image[(b * h + gy * p + py) * w + gx * p + px]);
                    }
                }
            }
            patches.push(flat);
        }
    }
    patches
}

/// Inverse of `to_patches`; exact bijection.
pub fn from_patches(patches: &[Vec<f64>], h: usize, w: usize, b_len: usize, p: usize) -> Vec<f64> {
    let (gh, gw) = (h / p, w / p);
    assert_eq!(patches.len(), gh * gw, "patch count");
    let mut image = vec![0.0f64; b_len * h * w];
    for gy in 0..gh {
        for gx in 0..gw {
            let flat = &patches[gy * gw + gx];
            assert_eq!(flat.len(), p * p * b_len, "patch length");
            for py in 0..p {
                for px in 0..p {
                    for b in 0..b_len {
                        image[(b * h + gy * p + py) * w + gx * p + px] =
                            flat[(py * p + px) * b_len + b];
                    }
                }
            }
        }
    }
    image
}

/// Encodes one sequence into the three stream images consumed by the model.
pub fn encode_sample(
    seq: &SkeletonSequence,
    topology: &SkeletonTopology,
    h: usize,
    w: usize,
    patch: usize,
) -> Result<EncodedSample, ModelError> {
    seq.validate()
        .map_err(|e| ModelError::Config(format!("invalid sequence: {e}")))?;
    if topology.joint_count != seq.joints {
        return Err(ModelError::Config(format!(
            "topology covers {} joints, sequence has {}",
            topology.joint_count, seq.joints
        )));
    }
    let b = seq.channels;
    let joints_stream: Vec<f64> = seq.data.iter().map(|&x| x as f64).collect();
    let vel_stream = velocities(seq);
    let bone_stream = bones(seq, topology);
    Ok(EncodedSample {
        joints: to_image(&joints_stream, seq.frames, seq.joints, b, h, w),
        velocities: to_image(&vel_stream, seq.frames, seq.joints, b, h, w),
        bones: to_image(&bone_stream, seq.frames, topology.bones.len(), b, h, w),
        height: h,
        width: w,
        channels: b,
        patch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_seq(rng: &mut ChaCha12Rng, t: usize, j: usize, b: usize) -> SkeletonSequence {
        let mut s = SkeletonSequence::zeros(t, j, b);
        for v in s.data.iter_mut() {
            *v = rng.gen_range(-2.0..2.0);
        }
        s
    }

    #[test]
    fn velocities_of_constant_sequence_are_zero() {
        let mut s = SkeletonSequence::zeros(4, 3, 3);
        for t in 0..4 {
            for j in 0..3 {
                s.joint_mut(t, j).copy_from_slice(&[1.0, 2.0, 3.0]);
            }
        }
        assert!(velocities(&s).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn velocities_of_linear_motion_equal_step() {
        let mut s = SkeletonSequence::zeros(5, 2, 3);
        for t in 0..5 {
            for j in 0..2 {
                let base = t as f32 * 0.25;
                s.joint_mut(t, j).copy_from_slice(&[base, -base, 2.0 * base]);
            }
        }
        let v = velocities(&s);
        assert!(v[..6].iter().all(|&x| x == 0.0), "frame 0 is zero");
        for t in 1..5 {
            for j in 0..2 {
                let row = &v[(t * 2 + j) * 3..(t * 2 + j) * 3 + 3];
                assert!((row[0] - 0.25).abs() < 1e-6);
                assert!((row[1] + 0.25).abs() < 1e-6);
                assert!((row[2] - 0.5).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn cumulative_sum_of_velocities_reconstructs_sequence() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let s = random_seq(&mut rng, 7, 4, 3);
        let v = velocities(&s);
        for j in 0..4 {
            for b in 0..3 {
                let mut acc = s.data[j * 3 + b] as f64;
                for t in 1..7 {
                    acc += v[(t * 4 + j) * 3 + b];
                    let expect = s.data[(t * 4 + j) * 3 + b] as f64;
                    assert!((acc - expect).abs() < 1e-9, "joint {j} axis {b} frame {t}");
                }
            }
        }
    }

    #[test]
    fn bones_of_coincident_joints_are_zero() {
        let mut s = SkeletonSequence::zeros(3, 5, 3);
        for t in 0..3 {
            for j in 0..5 {
                s.joint_mut(t, j).copy_from_slice(&[1.0, 1.0, 1.0]);
            }
        }
        let topo = SkeletonTopology::stick_figure(5);
        assert!(bones(&s, &topo).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_joint_bone_is_child_minus_parent() {
        let mut s = SkeletonSequence::zeros(2, 2, 3);
        s.joint_mut(0, 0).copy_from_slice(&[1.0, 2.0, 3.0]);
        s.joint_mut(0, 1).copy_from_slice(&[4.0, 6.0, 8.0]);
        s.joint_mut(1, 0).copy_from_slice(&[0.5, 0.5, 0.5]);
        s.joint_mut(1, 1).copy_from_slice(&[1.0, 1.0, 1.0]);
        let topo = SkeletonTopology::stick_figure(2);
        let b = bones(&s, &topo);
        assert_eq!(&b[..3], &[3.0, 4.0, 5.0]);
        assert_eq!(&b[3..], &[0.5, 0.5, 0.5]);
    }

    #[test]
    fn bone_vectors_telescope_along_root_paths() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let s = random_seq(&mut rng, 3, 9, 3);
        let topo = SkeletonTopology::stick_figure(9);
        let b = bones(&s, &topo);
        let edges = &topo.bones;
        // Walk each joint up to the root; the bone sum must equal
        // joint - root exactly in f64.
        for t in 0..3 {
            for j in 1..9 {
                let mut sum = [0.0f64; 3];
                let mut cur = j;
                while cur != 0 {
                    let e = edges.iter().position(|&(c, _)| c == cur).unwrap();
                    for ax in 0..3 {
                        sum[ax] += b[(t * edges.len() + e) * 3 + ax];
                    }
                    cur = edges[e].1;
                }
                let joint = s.joint3(t, j);
                let root = s.joint3(t, 0);
                for ax in 0..3 {
                    assert!((sum[ax] - (joint[ax] - root[ax])).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn to_image_identity_at_native_resolution() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let stream: Vec<f64> = (0..5 * 4 * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let img = to_image(&stream, 5, 4, 3, 5, 4);
        for t in 0..5 {
            for k in 0..4 {
                for b in 0..3 {
                    assert_eq!(img[(b * 5 + t) * 4 + k], stream[(t * 4 + k) * 3 + b]);
                }
            }
        }
    }

    #[test]
    fn to_image_constant_stream_gives_constant_image() {
        let stream = vec![2.5f64; 3 * 4 * 2];
        let img = to_image(&stream, 3, 4, 2, 11, 9);
        assert!(img.iter().all(|&v| (v - 2.5).abs() < 1e-12));
    }

    #[test]
    fn to_image_is_linear() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let x: Vec<f64> = (0..4 * 5 * 2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..4 * 5 * 2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (a, b) = (1.7, -0.4);
        let mixed: Vec<f64> = x.iter().zip(&y).map(|(&p, &q)| a * p + b * q).collect();
        let img_mixed = to_image(&mixed, 4, 5, 2, 13, 7);
        let img_x = to_image(&x, 4, 5, 2, 13, 7);
        let img_y = to_image(&y, 4, 5, 2, 13, 7);
        for i in 0..img_mixed.len() {
            assert!((img_mixed[i] - (a * img_x[i] + b * img_y[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn to_image_hand_computed_midpoints() {
        // 2x2 grid onto 3x3: the center is the average of all four corners,
        // edge midpoints average their two neighbors.
        let stream = vec![0.0, 2.0, 4.0, 10.0]; // [T=2][K=2][B=1]
        let img = to_image(&stream, 2, 2, 1, 3, 3);
        assert_eq!(img, vec![0.0, 1.0, 2.0, 2.0, 4.0, 6.0, 4.0, 7.0, 10.0]);
    }

    #[test]
    fn upsample_then_downsample_round_trip_is_exact() {
        // Corner-aligned doubling to (2T-1, 2K-1) keeps the original lattice
        // at even indices, so resampling back recovers the input exactly.
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let stream: Vec<f64> = (0..6 * 5 * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let up = to_image(&stream, 6, 5, 3, 11, 9);
        // Back to stream layout for the second pass.
        let mut up_stream = vec![0.0f64; 11 * 9 * 3];
        for b in 0..3 {
            for t in 0..11 {
                for k in 0..9 {
                    up_stream[(t * 9 + k) * 3 + b] = up[(b * 11 + t) * 9 + k];
                }
            }
        }
        let down = to_image(&up_stream, 11, 9, 3, 6, 5);
        for t in 0..6 {
            for k in 0..5 {
                for b in 0..3 {
                    let orig = stream[(t * 5 + k) * 3 + b];
                    assert!((down[(b * 6 + t) * 5 + k] - orig).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn patches_are_an_exact_bijection() {
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        let image: Vec<f64> = (0..2 * 8 * 12).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let patches = to_patches(&image, 8, 12, 2, 4);
        assert_eq!(patches.len(), (8 / 4) * (12 / 4));
        assert!(patches.iter().all(|p| p.len() == 4 * 4 * 2));
        assert_eq!(from_patches(&patches, 8, 12, 2, 4), image);
    }

    #[test]
    fn single_patch_is_whole_image() {
        let image: Vec<f64> = (0..3 * 4 * 4).map(|i| i as f64).collect();
        let patches = to_patches(&image, 4, 4, 3, 4);
        assert_eq!(patches.len(), 1);
        assert_eq!(from_patches(&patches, 4, 4, 3, 4), image);
    }

    #[test]
    fn encode_sample_produces_shared_shapes() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let s = random_seq(&mut rng, 6, 9, 3);
        let topo = SkeletonTopology::stick_figure(9);
        let enc = encode_sample(&s, &topo, 16, 16, 8).unwrap();
        assert_eq!(enc.joints.len(), 3 * 16 * 16);
        assert_eq!(enc.velocities.len(), enc.joints.len());
        assert_eq!(enc.bones.len(), enc.joints.len());
    }
}
