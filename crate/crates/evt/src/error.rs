use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvtError {
    #[error("scale parameter must be positive, got {0}")]
    InvalidScale(f64),

    #[error("exceedance values must be positive")]
    InvalidExceedance,

    #[error("insufficient exceedances: need {needed}, have {have}")]
    InsufficientExceedances { needed: usize, have: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("block size {block} invalid for {len} samples")]
    InvalidBlock { block: usize, len: usize },

    #[error("shape limit did not converge: last two evaluations {prev} and {last}")]
    NonConvergentShape { prev: f64, last: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
