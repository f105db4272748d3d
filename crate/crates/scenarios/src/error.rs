use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("runtime invariant violated: {0}")]
    InvariantViolation(String),

    #[error(transparent)]
    Sim(#[from] tailsim_core::SimError),

    #[error(transparent)]
    Evt(#[from] tailsim_evt::EvtError),
}
