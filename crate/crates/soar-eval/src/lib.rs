//! One-shot evaluation of the recognition model: nearest-support
//! classification over deployed-branch embeddings, macro-averaged metrics,
//! and robustness harnesses that corrupt the evaluation samples with
//! Gaussian noise or the occlusion operators before encoding.

mod classify;
mod embed;
mod error;
mod metrics;
mod noise;
mod sweep;

pub use classify::{classify_one_shot, MatchMetric};
pub use embed::{embed_samples, embed_sequence};
pub use error::EvalError;
pub use metrics::{metrics, Metrics};
pub use noise::add_gaussian_noise;
pub use sweep::{
    gaussian_noise_eval, occlusion_sweep, one_shot_eval, standard_sweep, write_metrics_csv,
    EvalOutcome, SweepCell, SweepConfig, SweepOp, SweepRow,
};
