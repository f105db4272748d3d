//! Per-node task backlog measured in bits.
//!
//! The backlog obeys the exact recursion
//! `backlog[t+1] = max(backlog[t] - served[t], 0) + arrived[t]`
//! with integer-bit accounting; it is the latency proxy every scenario
//! reports tail statistics on.

/// Queue backlog plus its per-slot history.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QueueState {
    backlog_bits: u64,
    history: Vec<u64>,
}

impl QueueState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn backlog_bits(&self) -> u64 {
        self.backlog_bits
    }

    /// Per-slot backlog samples, one per `step` call.
    pub fn history(&self) -> &[u64] {
        &self.history
    }

    /// Advance one slot: serve first (saturating at zero), then admit
    /// arrivals, then record the sample.
    pub fn step(&mut self, arrived_bits: u64, served_bits: u64) {
        self.backlog_bits = self.backlog_bits.saturating_sub(served_bits) + arrived_bits;
        self.history.push(self.backlog_bits);
    }

    /// Serve at most `rate_bits`, returning the bits actually drained.
    pub fn drainable(&self, rate_bits: u64) -> u64 {
        self.backlog_bits.min(rate_bits)
    }
}

/// Functional form of [`QueueState::step`].
pub fn step_queue(mut q: QueueState, arrived_bits: u64, served_bits: u64) -> QueueState {
    q.step(arrived_bits, served_bits);
    q
}
