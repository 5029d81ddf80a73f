use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use soar_geom::AffineCalibration;

use crate::{DataError, Dataset, DatasetMeta, SkeletonSequence, SkeletonTopology, FORMAT_VERSION};

/// Parameters for the synthetic multi-camera skeleton generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub classes: usize,
    pub samples_per_class: usize,
    pub cameras: usize,
    pub frames: usize,
    pub joints: usize,
    pub seed: u64,
}

pub struct SynthOutput {
    pub dataset: Dataset,
    /// World-frame to camera-frame rigid map per camera; camera 0 is the
    /// world frame.
    pub camera_transforms: Vec<AffineCalibration>,
}

/// Per-class motion program: a stick-figure base pose animated by per-joint
/// sinusoids whose frequency, multiplier, phase and amplitude identify the
/// class.
struct ClassMotion {
    base: Vec<[f64; 3]>,
    amp: Vec<[f64; 3]>,
    phase: Vec<f64>,
    mult: Vec<f64>,
    freq: f64,
}

/// Nominal capture rate used to convert frame index to seconds.
const FPS: f64 = 12.0;

fn class_motion(rng: &mut ChaCha12Rng, class: usize, n_classes: usize, topo: &SkeletonTopology) -> ClassMotion {
    let j = topo.joint_count;
    // Base pose: walk the bone tree outward from the pelvis, which sits
    // roughly 3 m in front of the reference camera.
    let mut base = vec![[0.0f64, 0.9, 3.0]; j];
    for &(child, parent) in &topo.bones {
        let p = base[parent];
        base[child] = [
            p[0] + rng.gen_range(-0.25..0.25),
            p[1] + rng.gen_range(-0.30..0.30),
            p[2] + rng.gen_range(-0.15..0.15),
        ];
    }
    let freq = 0.4 + 2.6 * class as f64 / n_classes.max(2) as f64;
    let amp = (0..j)
        .map(|_| {
            [
                rng.gen_range(0.05..0.25),
                rng.gen_range(0.05..0.25),
                rng.gen_range(0.05..0.25),
            ]
        })
        .collect();
    let phase = (0..j).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
    let mult = (0..j).map(|_| [1.0, 2.0, 3.0][rng.gen_range(0..3usize)]).collect();
    ClassMotion {
        base,
        amp,
        phase,
        mult,
        freq,
    }
}

impl ClassMotion {
    /// World-frame position of joint `j` at frame `t` for one instance's
    /// jitter (time shift, amplitude scale, body offset).
    fn position(
        &self,
        t: usize,
        j: usize,
        dphase: f64,
        ascale: f64,
        offset: [f64; 3],
    ) -> [f64; 3] {
        let theta =
            std::f64::consts::TAU * self.freq * self.mult[j] * (t as f64 / FPS) + self.phase[j] + dphase;
        let mut p = self.base[j];
        // Stagger per-axis phases so motion spans all three axes.
        let axis_shift = [0.0, 2.1, 4.2];
        for k in 0..3 {
            p[k] += offset[k] + ascale * self.amp[j][k] * (theta + axis_shift[k]).sin();
        }
        p
    }
}

pub fn synth_dataset(cfg: &SynthConfig) -> Result<SynthOutput, DataError> {
    if cfg.classes < 2 {
        return Err(DataError::Config(format!("need >= 2 classes, got {}", cfg.classes)));
    }
    if cfg.cameras < 1 {
        return Err(DataError::Config("need >= 1 camera".into()));
    }
    if cfg.joints < 5 {
        return Err(DataError::Config(format!("need >= 5 joints, got {}", cfg.joints)));
    }
    if cfg.frames < 2 {
        return Err(DataError::Config(format!("need >= 2 frames, got {}", cfg.frames)));
    }
    if cfg.samples_per_class < 1 {
        return Err(DataError::Config("need >= 1 sample per class".into()));
    }

    let topology = SkeletonTopology::stick_figure(cfg.joints);
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);

    // Camera rigs: camera 0 is the world frame; the rest are mild yaws and
    // shifts keeping subjects at comfortably positive depth.
    let mut camera_transforms = vec![AffineCalibration::identity()];
    for _ in 1..cfg.cameras {
        let yaw = rng.gen_range(-0.35..0.35);
        let t = [
            rng.gen_range(-0.3..0.3),
            rng.gen_range(-0.1..0.1),
            rng.gen_range(-0.3..0.3),
        ];
        camera_transforms.push(AffineCalibration::rigid(yaw, t));
    }

    let motions: Vec<ClassMotion> = (0..cfg.classes)
        .map(|c| class_motion(&mut rng, c, cfg.classes, &topology))
        .collect();

    let mut samples = Vec::with_capacity(cfg.classes * cfg.samples_per_class * cfg.cameras);
    for (c, motion) in motions.iter().enumerate() {
        for instance in 0..cfg.samples_per_class {
            let dphase = rng.gen_range(0.0..std::f64::consts::TAU);
            let ascale = rng.gen_range(0.85..1.15);
            let offset = [
                rng.gen_range(-0.1..0.1),
                rng.gen_range(-0.1..0.1),
                rng.gen_range(-0.1..0.1),
            ];
            // One world-frame trajectory per instance; every camera sees the
            // same motion through its own rigid map.
            let mut world = Vec::with_capacity(cfg.frames * cfg.joints);
            for t in 0..cfg.frames {
                for j in 0..cfg.joints {
                    let mut p = motion.position(t, j, dphase, ascale, offset);
                    for v in p.iter_mut() {
                        *v += rng.gen_range(-0.01..0.01);
                    }
                    world.push(p);
                }
            }
            let group_id = (c * cfg.samples_per_class + instance) as u32;
            for (k, cam) in camera_transforms.iter().enumerate() {
                let mut s = SkeletonSequence::zeros(cfg.frames, cfg.joints, 3);
                s.label = c as u32;
                s.camera_id = k as u32;
                s.group_id = group_id;
                s.subject_id = instance as u32;
                for (cell, p) in world.iter().enumerate() {
                    let q = cam.apply(*p);
                    let o = cell * 3;
                    s.data[o] = q[0] as f32;
                    s.data[o + 1] = q[1] as f32;
                    s.data[o + 2] = q[2] as f32;
                }
                samples.push(s);
            }
        }
    }

    let meta = DatasetMeta {
        format_version: FORMAT_VERSION,
        frames: cfg.frames,
        joints: cfg.joints,
        channels: 3,
        camera_count: cfg.cameras,
        class_names: (0..cfg.classes).map(|c| format!("class_{c:03}")).collect(),
        topology,
    };
    let dataset = Dataset { meta, samples };
    dataset.validate()?;
    Ok(SynthOutput {
        dataset,
        camera_transforms,
    })
}
