//! Six-state uncertainty lifecycle and its event-driven transition function.

mod engine;
mod event;
mod state;
mod table;

pub use engine::{check_timers, legal_targets, transition, LifecycleError, Outcome, Transition};
pub use event::{
    Assessment, EventBody, EventKind, HumanAction, HumanDecisionPayload, HumanRole,
    LifecycleEvent, NewEvent, Reassessment,
};
pub use state::LifecycleState;
pub use table::{rules, transition_table_document, Guard, StateMatch, TransitionRule, TRANSITION_TABLE};
