//! Scenario engines built on the simulation core and the EVT engine.
//!
//! Each module owns one experiment family and exposes a config struct, the
//! per-slot operations the experiment is made of, and a `run` entry point
//! that returns plot-ready rows. Runs are single-threaded and fully
//! deterministic given (config, seed); sweeps parallelize across runs.

pub mod error;
pub mod extreme_mec;
pub mod fed_evt;
pub mod rl_offload;
pub mod vr_arcade;

pub use error::ScenarioError;
