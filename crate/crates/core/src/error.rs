use thiserror::Error;

/// Errors raised by the simulation engine.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("probability must lie in [0, 1], got {0}")]
    InvalidProbability(f64),

    #[error("task size and processing density must be positive")]
    InvalidTask,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("task {task_id} failed: no reachable server")]
    TaskFailed { task_id: u64 },
}
