//! Offloadable computation tasks and their arrival process.

use crate::error::SimError;
use crate::rng::SimRng;

/// One unit of offloadable work.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: u64,
    /// Task payload in bits.
    pub size_bits: u64,
    /// Processing density in CPU cycles per bit.
    pub density: f64,
    pub arrival_slot: u64,
}

impl Task {
    /// Total CPU cycles required to execute this task.
    pub fn cycles(&self) -> f64 {
        self.size_bits as f64 * self.density
    }
}

/// Shape of the tasks an arrival process emits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskTemplate {
    pub size_bits: u64,
    pub density: f64,
}

impl TaskTemplate {
    pub fn new(size_bits: u64, density: f64) -> Result<Self, SimError> {
        if size_bits == 0 || !(density > 0.0) {
            return Err(SimError::InvalidTask);
        }
        Ok(Self { size_bits, density })
    }

    fn instantiate(&self, id: u64, arrival_slot: u64) -> Task {
        Task {
            id,
            size_bits: self.size_bits,
            density: self.density,
            arrival_slot,
        }
    }
}

/// Per-slot Bernoulli arrival: returns a task with probability `prob`,
/// stamped with the current slot. `next_id` is advanced on emission.
pub fn bernoulli_arrival(
    rng: &mut SimRng,
    prob: f64,
    template: &TaskTemplate,
    slot: u64,
    next_id: &mut u64,
) -> Result<Option<Task>, SimError> {
    if !(0.0..=1.0).contains(&prob) {
        return Err(SimError::InvalidProbability(prob));
    }
    if rng.bernoulli(prob) {
        let task = template.instantiate(*next_id, slot);
        *next_id += 1;
        Ok(Some(task))
    } else {
        Ok(None)
    }
}
