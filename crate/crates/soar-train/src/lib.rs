//! Optimization loop for the three-stream recognition model: triplet,
//! classification and latent-consistency losses over batched two-branch
//! forwards, prototype-guided auxiliary augmentation with a warm-up /
//! decenterization / prototype schedule, a per-epoch prototype memory
//! bank, and decoupled-decay updates under cosine annealing.

mod augment;
mod bank;
mod config;
mod error;
mod losses;
mod mine;
mod optim;
mod train;

pub use augment::{augment_features, AugmentParams, PrototypeSource};
pub use bank::PrototypeMemoryBank;
pub use config::{cosine_lr, phase_for, Phase, TrainConfig};
pub use error::TrainError;
pub use losses::{cross_entropy, lsc_loss, pairwise_distance, triplet_margin_loss};
pub use mine::{mine_triplets, mine_triplets_hard, Triplet};
pub use optim::AdamW;
pub use train::{
    batch_loss, encode_indices, pooled_features, train, write_log_csv, BatchLoss, EpochLog,
    TrainLog, TrainOutcome,
};
