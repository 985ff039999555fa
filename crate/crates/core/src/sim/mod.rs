//! Deterministic seeded discrete-event simulator: reliable exactly-once FIFO
//! channels, adversarial schedulers, crash injection.

mod fault;
mod policy;
mod run;
mod trace;

pub use fault::FaultPlan;
pub use policy::SchedulerPolicy;
pub use run::{run, SimError};
pub use trace::{Event, SimTrace, TraceIndex, TraceMeta, TraceReadError};

/// Process identifier, `0..n`.
pub type ProcId = usize;
