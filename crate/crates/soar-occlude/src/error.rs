use thiserror::Error;

#[derive(Debug, Error)]
pub enum OccludeError {
    #[error("occlusion configuration error: {0}")]
    Config(String),

    #[error("missing calibration from camera {from} to camera {to}")]
    MissingCalibration { from: u32, to: u32 },

    #[error("no valid occluder placement after {attempts} attempts")]
    NoValidPlacement { attempts: usize },

    #[error("degenerate projection after {attempts} attempts")]
    DegenerateProjection { attempts: usize },

    #[error(transparent)]
    Geometry(#[from] soar_geom::GeomError),

    #[error("occluder file error: {0}")]
    OccluderFile(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
