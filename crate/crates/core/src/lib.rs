//! Deterministic simulator and verification harness for asynchronous
//! approximate convex consensus under crash faults with incorrect inputs.
//!
//! The crate is organized around an exact-arithmetic polytope calculus
//! ([`geometry`]), a per-process protocol state machine ([`protocol`]), a
//! seeded discrete-event simulator ([`sim`]) whose runs produce replayable
//! traces, and independent post-hoc checkers ([`matrix_oracle`],
//! [`verifier`], [`optimizer`]) that re-derive the protocol's guarantees
//! from a trace alone.

pub mod geometry;
pub mod matrix_oracle;
pub mod optimizer;
pub mod presets;
pub mod protocol;
pub mod rat;
pub mod sim;
pub mod stable_vector;
pub mod verifier;

pub use rat::Rat;
