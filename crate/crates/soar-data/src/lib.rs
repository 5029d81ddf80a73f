//! Core dataset types for multi-camera skeleton sequences, a parametric
//! synthetic motion generator, one-shot split construction, and the binary
//! dataset container format.

mod error;
mod io;
mod split;
mod synth;
mod types;

pub use error::DataError;
pub use io::{load_dataset, save_dataset, FORMAT_VERSION};
pub use split::{make_one_shot_split, OneShotSplit, SplitPreset};
pub use synth::{synth_dataset, SynthConfig, SynthOutput};
pub use types::{Dataset, DatasetMeta, SkeletonSequence, SkeletonTopology};
