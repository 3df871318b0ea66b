use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::mechanisms::HandlingAction;
use crate::model::{
    ActorId, EventId, EvidenceItem, OntologicalContext, RecordId, Tick, UncertaintyRecord,
};
use crate::policy::Policy;

/// Discriminant of [`EventBody`]. The first seven drive the transition table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    CharacterizationCompleted,
    MitigationInitiated,
    EvidenceAccumulated,
    DecisionCommitted,
    OrchestratorEscalation,
    HumanDecision,
    TimerElapsed,
    RecordCreated,
    DependencyLinked,
    PolicyInstalled,
    ActionExecuted,
    TaskClaimed,
}

impl EventKind {
    pub const LIFECYCLE: [EventKind; 7] = [
        EventKind::CharacterizationCompleted,
        EventKind::MitigationInitiated,
        EventKind::EvidenceAccumulated,
        EventKind::DecisionCommitted,
        EventKind::OrchestratorEscalation,
        EventKind::HumanDecision,
        EventKind::TimerElapsed,
    ];

    pub fn is_lifecycle(self) -> bool {
        Self::LIFECYCLE.contains(&self)
    }

    /// Events applied by the registry itself rather than through `transition`.
    pub fn is_registry_level(self) -> bool {
        matches!(
            self,
            EventKind::RecordCreated | EventKind::DependencyLinked | EventKind::PolicyInstalled
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HumanRole {
    Interpretation,
    Judgment,
    RiskAcceptance,
    Governance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HumanAction {
    Resolve,
    AcceptRisk,
    RequestMoreEvidence,
    AuthorizeAdaptation,
}

impl HumanAction {
    pub const ALL: [HumanAction; 4] = [
        HumanAction::Resolve,
        HumanAction::AcceptRisk,
        HumanAction::RequestMoreEvidence,
        HumanAction::AuthorizeAdaptation,
    ];
}

/// Characterization results applied by `CharacterizationCompleted`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assessment {
    #[serde(default)]
    pub scope: BTreeSet<String>,
    pub severity: f64,
    pub likelihood: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expiry: Option<Tick>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ontological_ctx: Option<OntologicalContext>,
}

/// Explicit re-assessment carried alongside evidence. Only this changes severity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Reassessment {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub severity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub likelihood: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumanDecisionPayload {
    pub task: EventId,
    pub human: ActorId,
    pub role: HumanRole,
    pub action: HumanAction,
    pub justification: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    CharacterizationCompleted {
        assessment: Assessment,
    },
    MitigationInitiated {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        action: Option<HandlingAction>,
    },
    EvidenceAccumulated {
        evidence: Vec<EvidenceItem>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reassessment: Option<Reassessment>,
        /// Set on events emitted by risk propagation.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        derived_from: Option<RecordId>,
        /// Escalation task a human-provided item answers.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        task: Option<EventId>,
    },
    DecisionCommitted {
        decision: String,
    },
    OrchestratorEscalation {
        reason: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        action: Option<HandlingAction>,
    },
    HumanDecision(HumanDecisionPayload),
    TimerElapsed {
        deadline: Tick,
    },
    RecordCreated {
        record: Box<UncertaintyRecord>,
    },
    DependencyLinked {
        upstream: RecordId,
        attenuation: f64,
    },
    PolicyInstalled {
        policy: Box<Policy>,
    },
    ActionExecuted {
        action: HandlingAction,
    },
    TaskClaimed {
        task: EventId,
        human: ActorId,
    },
}

impl EventBody {
    pub fn kind(&self) -> EventKind {
        match self {
            EventBody::CharacterizationCompleted { .. } => EventKind::CharacterizationCompleted,
            EventBody::MitigationInitiated { .. } => EventKind::MitigationInitiated,
            EventBody::EvidenceAccumulated { .. } => EventKind::EvidenceAccumulated,
            EventBody::DecisionCommitted { .. } => EventKind::DecisionCommitted,
            EventBody::OrchestratorEscalation { .. } => EventKind::OrchestratorEscalation,
            EventBody::HumanDecision(_) => EventKind::HumanDecision,
            EventBody::TimerElapsed { .. } => EventKind::TimerElapsed,
            EventBody::RecordCreated { .. } => EventKind::RecordCreated,
            EventBody::DependencyLinked { .. } => EventKind::DependencyLinked,
            EventBody::PolicyInstalled { .. } => EventKind::PolicyInstalled,
            EventBody::ActionExecuted { .. } => EventKind::ActionExecuted,
            EventBody::TaskClaimed { .. } => EventKind::TaskClaimed,
        }
    }

    /// Plain evidence event with no re-assessment.
    pub fn evidence(items: Vec<EvidenceItem>) -> Self {
        EventBody::EvidenceAccumulated {
            evidence: items,
            reassessment: None,
            derived_from: None,
            task: None,
        }
    }

    pub fn handling_action(&self) -> Option<&HandlingAction> {
        match self {
            EventBody::MitigationInitiated { action } => action.as_ref(),
            EventBody::OrchestratorEscalation { action, .. } => action.as_ref(),
            EventBody::ActionExecuted { action } => Some(action),
            _ => None,
        }
    }
}

/// The event `e` in `u(t+1) = f(u(t), e)`, as persisted in the log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifecycleEvent {
    pub id: EventId,
    pub timestamp: Tick,
    /// Absent only for policy installs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<RecordId>,
    pub actor: ActorId,
    #[serde(flatten)]
    pub body: EventBody,
}

impl LifecycleEvent {
    pub fn kind(&self) -> EventKind {
        self.body.kind()
    }
}

/// An event before the registry has issued its id.
#[derive(Debug, Clone, PartialEq)]
pub struct NewEvent {
    pub timestamp: Tick,
    pub target: Option<RecordId>,
    pub actor: ActorId,
    pub body: EventBody,
}

impl NewEvent {
    pub fn new(timestamp: Tick, target: RecordId, actor: impl Into<ActorId>, body: EventBody) -> Self {
        NewEvent {
            timestamp,
            target: Some(target),
            actor: actor.into(),
            body,
        }
    }

    pub fn into_event(self, id: EventId) -> LifecycleEvent {
        LifecycleEvent {
            id,
            timestamp: self.timestamp,
            target: self.target,
            actor: self.actor,
            body: self.body,
        }
    }
}
