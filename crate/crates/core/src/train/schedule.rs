//! Learning-rate schedules and their toy scaling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwaConfig {
    pub lr_restart: f64,
    pub cycle_epochs: usize,
    pub snapshot_every: usize,
    pub cycles: usize,
}

impl Default for SwaConfig {
    fn default() -> Self {
        SwaConfig {
            lr_restart: 5e-5,
            cycle_epochs: 30,
            snapshot_every: 3,
            cycles: 5,
        }
    }
}

impl SwaConfig {
    pub fn total_epochs(&self) -> usize {
        self.cycles * self.cycle_epochs
    }

    pub fn snapshots_per_cycle(&self) -> usize {
        self.cycle_epochs / self.snapshot_every.max(1)
    }

    pub fn total_snapshots(&self) -> usize {
        self.cycles * self.snapshots_per_cycle()
    }

    /// Whether a snapshot is taken at the end of cycle epoch `e` (0-based).
    pub fn is_snapshot_epoch(&self, e: usize) -> bool {
        (e + 1) % self.snapshot_every == 0
    }

    pub fn validate(&self, errors: &mut Vec<String>) {
        if !(self.lr_restart > 0.0 && self.lr_restart.is_finite()) {
            errors.push("swa.lr_restart must be > 0".into());
        }
        if self.cycle_epochs == 0 {
            errors.push("swa.cycle_epochs must be >= 1".into());
        }
        if self.snapshot_every == 0 || self.cycle_epochs % self.snapshot_every.max(1) != 0 {
            errors.push(format!(
                "swa.snapshot_every ({}) must divide swa.cycle_epochs ({})",
                self.snapshot_every, self.cycle_epochs
            ));
        }
    }
}

/// Pipeline A: flat then cosine, followed by SWA cycles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleA {
    pub epochs_total: usize,
    pub flat_epochs: usize,
    pub lr0: f64,
    pub swa: SwaConfig,
}

impl Default for ScheduleA {
    fn default() -> Self {
        ScheduleA {
            epochs_total: 200,
            flat_epochs: 100,
            lr0: 1e-4,
            swa: SwaConfig::default(),
        }
    }
}

fn scale(n: usize, factor: usize) -> usize {
    (n / factor.max(1)).max(1)
}

impl ScheduleA {
    /// Divide every epoch count by `factor` (each at least 1). The snapshot
    /// interval is clamped to the scaled cycle length.
    pub fn toy_scaled(&self, factor: usize) -> Self {
        let cycle = scale(self.swa.cycle_epochs, factor);
        let mut every = self.swa.snapshot_every.min(cycle).max(1);
        while cycle % every != 0 {
            every -= 1;
        }
        ScheduleA {
            epochs_total: scale(self.epochs_total, factor),
            flat_epochs: (self.flat_epochs / factor.max(1)).min(scale(self.epochs_total, factor)),
            lr0: self.lr0,
            swa: SwaConfig {
                cycle_epochs: cycle,
                snapshot_every: every,
                ..self.swa
            },
        }
    }

    pub fn validate(&self, errors: &mut Vec<String>) {
        if self.epochs_total == 0 {
            errors.push("schedule_a.epochs_total must be >= 1".into());
        }
        if self.flat_epochs > self.epochs_total {
            errors.push("schedule_a.flat_epochs must not exceed epochs_total".into());
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            errors.push("schedule_a.lr0 must be > 0".into());
        }
        self.swa.validate(errors);
    }
}

/// Whether pipeline B's iteration budget counts epochs or optimizer steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IterationUnit {
    Epochs,
    Steps,
}

/// Pipeline B: cosine annealing over the whole budget, best validation loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleB {
    pub epochs_max: usize,
    pub lr0: f64,
    pub batch: usize,
    pub unit: IterationUnit,
}

impl Default for ScheduleB {
    fn default() -> Self {
        ScheduleB {
            epochs_max: 400,
            lr0: 1e-4,
            batch: 3,
            unit: IterationUnit::Epochs,
        }
    }
}

impl ScheduleB {
    pub fn toy_scaled(&self, factor: usize) -> Self {
        ScheduleB {
            epochs_max: scale(self.epochs_max, factor),
            ..*self
        }
    }

    pub fn validate(&self, errors: &mut Vec<String>) {
        if self.epochs_max == 0 {
            errors.push("schedule_b.epochs_max must be >= 1".into());
        }
        if self.batch == 0 {
            errors.push("schedule_b.batch must be >= 1".into());
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            errors.push("schedule_b.lr0 must be > 0".into());
        }
    }
}

/// `lr0` until `flat`, then half-cosine down to 0 at `total`.
pub fn cosine_decay(epoch: usize, lr0: f64, flat: usize, total: usize) -> Result<f64> {
    if epoch > total {
        return Err(Error::InvalidArgument(format!(
            "epoch {epoch} outside 0..={total}"
        )));
    }
    if flat > total {
        return Err(Error::InvalidArgument(format!(
            "flat phase {flat} longer than schedule {total}"
        )));
    }
    if epoch < flat || total == flat {
        return Ok(lr0);
    }
    let t = (epoch - flat) as f64 / (total - flat) as f64;
    Ok(lr0 * 0.5 * (1.0 + (std::f64::consts::PI * t).cos()))
}

/// Learning rate of pipeline A's first phase.
pub fn cosine_lr(epoch: usize, s: &ScheduleA) -> Result<f64> {
    cosine_decay(epoch, s.lr0, s.flat_epochs, s.epochs_total)
}

/// Learning rate within one SWA cycle; restarts at every cycle boundary.
pub fn swa_cycle_lr(epoch_in_cycle: usize, swa: &SwaConfig) -> Result<f64> {
    cosine_decay(epoch_in_cycle, swa.lr_restart, 0, swa.cycle_epochs)
}
