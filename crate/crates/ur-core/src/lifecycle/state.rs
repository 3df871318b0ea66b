use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LifecycleState {
    Detected,
    Characterized,
    Mitigated,
    Resolved,
    Escalated,
    Expired,
}

impl LifecycleState {
    pub const ALL: [LifecycleState; 6] = [
        LifecycleState::Detected,
        LifecycleState::Characterized,
        LifecycleState::Mitigated,
        LifecycleState::Resolved,
        LifecycleState::Escalated,
        LifecycleState::Expired,
    ];

    /// Resolved and Expired absorb every event.
    pub fn is_terminal(self) -> bool {
        matches!(self, LifecycleState::Resolved | LifecycleState::Expired)
    }
}

impl fmt::Display for LifecycleState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}
