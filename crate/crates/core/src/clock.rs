//! Slotted simulation clock.

use crate::error::SimError;

pub const DEFAULT_SLOT_DURATION_S: f64 = 1e-3;

/// Discrete clock; `slot` advances by exactly one per engine step.
#[derive(Debug, Clone, PartialEq)]
pub struct SimClock {
    slot: u64,
    slot_duration_s: f64,
}

impl SimClock {
    pub fn new(slot_duration_s: f64) -> Result<Self, SimError> {
        if !(slot_duration_s > 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "slot_duration must be positive, got {slot_duration_s}"
            )));
        }
        Ok(Self {
            slot: 0,
            slot_duration_s,
        })
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn slot_duration_s(&self) -> f64 {
        self.slot_duration_s
    }

    /// Elapsed simulated time in milliseconds.
    pub fn elapsed_ms(&self) -> f64 {
        self.slot as f64 * self.slot_duration_s * 1e3
    }

    pub fn tick(&mut self) {
        self.slot += 1;
    }
}

impl Default for SimClock {
    fn default() -> Self {
        Self::new(DEFAULT_SLOT_DURATION_S).unwrap()
    }
}
