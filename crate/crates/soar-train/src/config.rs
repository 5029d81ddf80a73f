use serde::{Deserialize, Serialize};

use crate::TrainError;

/// Optimization hyperparameters. Defaults follow the published recipe:
/// peak learning rate 3.5e-5 under cosine annealing, 50 epochs, batches of
/// 32, loss weights (1.0, 0.4, 0.1), triplet margin 0.2, a 20-epoch warm-up
/// before prototypes exist, then 10 epochs of decenterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub w_tpl: f64,
    pub w_cls: f64,
    pub w_lsc: f64,
    pub margin: f64,
    /// Per-coordinate offset inside the squared pairwise distance.
    pub eps: f64,
    /// Epochs of self-augmentation before any prototype may be read.
    pub warmup_epochs: usize,
    /// Epochs of zero-prototype augmentation after warm-up.
    pub decenter_epochs: usize,
    pub weight_decay: f64,
    /// Mine hardest positive/negative instead of uniform draws.
    pub hard_mining: bool,
    /// Save a checkpoint every k epochs when a directory is given; 0 = off.
    pub checkpoint_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 3.5e-5,
            epochs: 50,
            batch_size: 32,
            w_tpl: 1.0,
            w_cls: 0.4,
            w_lsc: 0.1,
            margin: 0.2,
            eps: 1e-6,
            warmup_epochs: 20,
            decenter_epochs: 10,
            weight_decay: 0.01,
            hard_mining: false,
            checkpoint_every: 0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(TrainError::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.epochs == 0 {
            return Err(TrainError::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be >= 1".into()));
        }
        for (name, w) in [("w_tpl", self.w_tpl), ("w_cls", self.w_cls), ("w_lsc", self.w_lsc)] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(TrainError::Config(format!("{name} must be >= 0, got {w}")));
            }
        }
        if !(self.margin.is_finite() && self.margin >= 0.0) {
            return Err(TrainError::Config(format!("margin must be >= 0, got {}", self.margin)));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(TrainError::Config(format!(
                "weight_decay must be >= 0, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

/// Augmentation regime for the auxiliary branch, derived from the epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Prototype replaced by the sample's own pooled tokens (detached).
    Warmup,
    /// Prototype replaced by the zero vector.
    Decenter,
    /// Prototype read from the memory bank.
    Prototype,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Warmup => "warmup",
            Phase::Decenter => "decenter",
            Phase::Prototype => "prototype",
        }
    }
}

pub fn phase_for(epoch: usize, config: &TrainConfig) -> Phase {
    if epoch < config.warmup_epochs {
        Phase::Warmup
    } else if epoch < config.warmup_epochs + config.decenter_epochs {
        Phase::Decenter
    } else {
        Phase::Prototype
    }
}

/// Cosine-annealed learning rate: full `base` at epoch 0, decaying along a
/// half cosine toward zero at `total` epochs.
pub fn cosine_lr(base: f64, epoch: usize, total: usize) -> f64 {
    assert!(total > 0 && epoch < total);
    base * 0.5 * (1.0 + (std::f64::consts::PI * epoch as f64 / total as f64).cos())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_json() {
        let cfg = TrainConfig::default();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: TrainConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
        // Missing fields fall back to defaults.
        let sparse: TrainConfig = serde_json::from_str(r#"{"epochs": 3, "seed": 7}"#).unwrap();
        assert_eq!(sparse.epochs, 3);
        assert_eq!(sparse.seed, 7);
        assert_eq!(sparse.lr, 3.5e-5);
        assert_eq!(sparse.warmup_epochs, 20);
    }

    #[test]
    fn phase_schedule_boundaries() {
        let cfg = TrainConfig::default();
        assert_eq!(phase_for(0, &cfg), Phase::Warmup);
        assert_eq!(phase_for(19, &cfg), Phase::Warmup);
        assert_eq!(phase_for(20, &cfg), Phase::Decenter);
        assert_eq!(phase_for(29, &cfg), Phase::Decenter);
        assert_eq!(phase_for(30, &cfg), Phase::Prototype);
        assert_eq!(phase_for(49, &cfg), Phase::Prototype);
    }

    #[test]
    fn cosine_schedule_endpoints_and_monotonicity() {
        let base = 3.5e-5;
        assert_eq!(cosine_lr(base, 0, 50), base);
        let mut prev = f64::INFINITY;
        for e in 0..50 {
            let lr = cosine_lr(base, e, 50);
            assert!(lr > 0.0 && lr <= base);
            assert!(lr < prev);
            prev = lr;
        }
        // Halfway through the run the rate sits at half the peak.
        assert!((cosine_lr(base, 25, 50) - 0.5 * base).abs() < 1e-20);
    }

    #[test]
    fn validation_rejects_bad_fields() {
        let mut cfg = TrainConfig::default();
        cfg.lr = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::default();
        cfg.batch_size = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::default();
        cfg.margin = -0.1;
        assert!(cfg.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }
}
