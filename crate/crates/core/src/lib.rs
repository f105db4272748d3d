//! Deterministic slotted-time simulation engine.
//!
//! Provides the shared mechanics every scenario builds on: a slot clock,
//! seeded per-process RNG streams, Bernoulli task arrivals, exact queue
//! recursion in bits, a two-state blockage channel model, FIFO compute
//! servers, and hedged (delayed-duplicate) offloading.
//!
//! Everything here is single-threaded per run by construction: the only
//! sources of randomness are explicit [`SimRng`] streams, so two runs with
//! the same configuration and seed produce byte-identical event logs.

pub mod channel;
pub mod clock;
pub mod error;
pub mod event_log;
pub mod hedge;
pub mod queue;
pub mod rng;
pub mod server;
pub mod task;

pub use channel::{BlockageProcess, ChannelState, LinkParams};
pub use clock::SimClock;
pub use error::SimError;
pub use event_log::EventLog;
pub use hedge::{hedged_completion, hedged_offload, HedgeOutcome, HedgeWinner};
pub use queue::QueueState;
pub use rng::SimRng;
pub use server::ServerState;
pub use task::{bernoulli_arrival, Task, TaskTemplate};
