use std::collections::BTreeMap;

use crate::TrainError;

/// Per-class mean of pooled middle-stage features over the training set,
/// fully recomputed at every epoch end. Reads are gated behind the warm-up
/// threshold; the first read epoch is recorded so the schedule can be
/// audited after a run.
#[derive(Debug, Clone)]
pub struct PrototypeMemoryBank {
    warmup_epochs: usize,
    prototypes: BTreeMap<u32, Vec<f64>>,
    counts: BTreeMap<u32, usize>,
    epoch_stamp: Option<usize>,
    first_read_epoch: Option<usize>,
}

impl PrototypeMemoryBank {
    pub fn new(warmup_epochs: usize) -> Self {
        PrototypeMemoryBank {
            warmup_epochs,
            prototypes: BTreeMap::new(),
            counts: BTreeMap::new(),
            epoch_stamp: None,
            first_read_epoch: None,
        }
    }

    /// Replaces the bank with per-class means of `features`, accumulated at
    /// f64 in the order given. Callers pass samples in ascending dataset
    /// index order so the sums are reproducible bit for bit.
    pub fn rebuild(&mut self, labels: &[u32], features: &[Vec<f64>], epoch: usize) {
        assert_eq!(labels.len(), features.len());
        assert!(!labels.is_empty(), "rebuild over an empty training set");
        let dim = features[0].len();
        let mut sums: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for (&label, f) in labels.iter().zip(features) {
            assert_eq!(f.len(), dim, "inconsistent feature widths");
            assert!(f.iter().all(|v| v.is_finite()), "non-finite feature for class {label}");
            let sum = sums.entry(label).or_insert_with(|| vec![0.0; dim]);
            for (s, v) in sum.iter_mut().zip(f) {
                *s += v;
            }
            *counts.entry(label).or_insert(0) += 1;
        }
        for (label, sum) in sums.iter_mut() {
            let n = counts[label] as f64;
            for s in sum.iter_mut() {
                *s /= n;
            }
        }
        self.prototypes = sums;
        self.counts = counts;
        self.epoch_stamp = Some(epoch);
    }

    /// Reads one class prototype. Panics if the schedule is violated (any
    /// read before the warm-up threshold is a bug, not a runtime
    /// condition); a class absent from the bank is a state error.
    pub fn get(&mut self, class: u32, epoch: usize) -> Result<&[f64], TrainError> {
        assert!(
            epoch >= self.warmup_epochs,
            "prototype read at epoch {epoch}, before warm-up ends at {}",
            self.warmup_epochs
        );
        if self.first_read_epoch.map_or(true, |e| epoch < e) {
            self.first_read_epoch = Some(epoch);
        }
        self.prototypes
            .get(&class)
            .map(|v| v.as_slice())
            .ok_or_else(|| TrainError::State(format!("no prototype for class {class}")))
    }

    /// Read-only view for oracles and serialization; not schedule-gated.
    pub fn snapshot(&self) -> &BTreeMap<u32, Vec<f64>> {
        &self.prototypes
    }

    pub fn count(&self, class: u32) -> Option<usize> {
        self.counts.get(&class).copied()
    }

    pub fn len(&self) -> usize {
        self.prototypes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prototypes.is_empty()
    }

    pub fn epoch_stamp(&self) -> Option<usize> {
        self.epoch_stamp
    }

    pub fn first_read_epoch(&self) -> Option<usize> {
        self.first_read_epoch
    }
}
