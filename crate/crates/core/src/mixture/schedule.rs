//! Learning-rate schedules over one optimizer timeline.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrKind {
    #[default]
    Cosine,
    Linear,
    Constant,
}

/// Linear warmup from 0 to `base_lr` over `warmup_steps`, then decay to 0
/// at `total_steps`. Defined for steps `0..=total_steps`; later steps clamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub total_steps: u64,
    pub base_lr: f64,
    pub warmup_steps: u64,
    pub kind: LrKind,
}

/// Warmup length for a ratio, rounded up. The epsilon keeps products such
/// as `0.05 * 1000` from rounding up to an extra step.
pub fn warmup_steps(total_steps: u64, warmup_ratio: f64) -> u64 {
    ((warmup_ratio * total_steps as f64) - 1e-9).ceil().max(0.0) as u64
}

pub fn lr_schedule(total_steps: u64, base_lr: f64, warmup_ratio: f64, kind: LrKind) -> LrSchedule {
    assert!(total_steps >= 1, "total_steps must be at least 1");
    assert!((0.0..1.0).contains(&warmup_ratio), "warmup_ratio must be in [0, 1)");
    LrSchedule {
        total_steps,
        base_lr,
        warmup_steps: warmup_steps(total_steps, warmup_ratio).min(total_steps - 1),
        kind,
    }
}

fn cosine(from: f64, progress: f64) -> f64 {
    from * 0.5 * (1.0 + (PI * progress).cos())
}

impl LrSchedule {
    pub fn lr(&self, step: u64) -> f64 {
        let step = step.min(self.total_steps);
        let w = self.warmup_steps;
        if step < w {
            return self.base_lr * step as f64 / w as f64;
        }
        let progress = (step - w) as f64 / (self.total_steps - w) as f64;
        match self.kind {
            LrKind::Cosine => cosine(self.base_lr, progress),
            LrKind::Linear => self.base_lr * (1.0 - progress),
            LrKind::Constant => self.base_lr,
        }
    }

    /// Values at steps `0..=total_steps`.
    pub fn values(&self) -> Vec<f64> {
        (0..=self.total_steps).map(|s| self.lr(s)).collect()
    }
}

/// Cosine from a checkpoint's learning rate to 0 over the remaining steps,
/// with no warmup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResumeCosine {
    pub from_lr: f64,
    pub remaining_steps: u64,
}

pub fn resume_cosine(from_lr: f64, remaining_steps: u64) -> ResumeCosine {
    assert!(remaining_steps >= 1, "remaining_steps must be at least 1");
    ResumeCosine {
        from_lr,
        remaining_steps,
    }
}

impl ResumeCosine {
    pub fn lr(&self, step: u64) -> f64 {
        cosine(
            self.from_lr,
            step.min(self.remaining_steps) as f64 / self.remaining_steps as f64,
        )
    }
}
