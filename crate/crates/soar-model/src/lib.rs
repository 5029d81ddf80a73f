//! Three-stream attention model over skeleton-derived images: stream
//! encodings, the fusion block, staged token attention with inter-stage
//! shrinking, parameter management and checkpointing. Forward passes build
//! on the reverse-mode tape in soar-grad; f32 for training, f64 for
//! finite-difference verification.

pub mod checkpoint;
pub mod config;
pub mod encoding;
mod error;
pub mod mafm;
pub mod model;
pub mod params;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use config::ModelConfig;
pub use encoding::{encode_sample, EncodedSample};
pub use error::ModelError;
pub use model::{Binding, BnUpdate, Forward, MainOut, Model, TrainOut, BN_MOMENTUM};
pub use params::{catalog, is_learned, param_count, Param, ParamStore};
