//! The six role-based mechanisms: Observer, Reasoner, Constructor, Evolver,
//! Orchestrator and Commander.

mod commander;
mod constructor;
mod detector;
mod evolver;
mod observer;
mod orchestrator;
mod reasoner;
mod signal;

pub use commander::{execute, CommanderError};
pub use constructor::{
    assessment, characterize, construct, duplicate_of, upstream_links, ConstructError,
};
pub use detector::{
    bind_rules, detect, DetectorRule, Predicate, Proposal, DEFAULT_CALIBRATION_DELTA,
};
pub use evolver::{evolve, fuse_confidence, logit, sigmoid, Evolution, LOGIT_CLAMP};
pub use observer::{MalformedInput, Observer};
pub use orchestrator::{
    agents_disagree, hitl_rule_id, hitl_trigger_name, orchestrate, ActionKind, ActionTemplate,
    Authorization, HandlingAction, OrchestrationRule, RuleGuard,
};
pub use reasoner::{attach_references, synthesize};
pub use signal::{
    HumanInput, InfrastructureChange, Layer, Measurement, Message, OperationalMetrics,
    ReasoningTrace, ReasoningTraces, Signal, SignalContent,
};
