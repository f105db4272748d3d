//! Edge compute server with FIFO service.

use std::collections::VecDeque;

use crate::task::Task;

/// One edge server: fixed compute capability, FIFO service queue.
#[derive(Debug, Clone, Default)]
pub struct ServerState {
    /// CPU cycles the server executes per slot.
    pub capability: u64,
    pub service_queue: VecDeque<Task>,
    /// First slot at which the server is free again.
    pub busy_until: u64,
}

impl ServerState {
    pub fn new(capability: u64) -> Self {
        Self {
            capability,
            service_queue: VecDeque::new(),
            busy_until: 0,
        }
    }

    pub fn is_reachable(&self) -> bool {
        self.capability > 0
    }

    /// Whole slots needed to execute `task` once it starts.
    pub fn service_slots(&self, task: &Task) -> u64 {
        (task.cycles() / self.capability as f64).ceil() as u64
    }

    /// Completion slot if `task` were enqueued at `start_slot`; `None` when
    /// the server cannot serve at all.
    pub fn completion_if_offloaded(&self, task: &Task, start_slot: u64) -> Option<u64> {
        if !self.is_reachable() {
            return None;
        }
        let begin = self.busy_until.max(start_slot);
        Some(begin + self.service_slots(task))
    }

    /// Enqueue `task` at `start_slot` and commit the capacity; returns the
    /// completion slot.
    pub fn commit(&mut self, task: Task, start_slot: u64) -> u64 {
        let completion = self
            .completion_if_offloaded(&task, start_slot)
            .expect("commit requires a reachable server");
        self.service_queue.push_back(task);
        self.busy_until = completion;
        completion
    }
}
