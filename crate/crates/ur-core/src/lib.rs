//! Runtime uncertainty governance for multi-agent systems.
//!
//! Uncertainty records move through a six-state lifecycle driven by
//! time-indexed evidence and handling actions. All state lives in an
//! event-sourced [`registry::Registry`]; everything else is a pure function
//! over it.

pub mod canonical;
pub mod escalation;
pub mod governor;
pub mod lifecycle;
pub mod mechanisms;
pub mod model;
pub mod policy;
pub mod registry;
