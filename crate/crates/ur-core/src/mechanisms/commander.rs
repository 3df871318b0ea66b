use thiserror::Error;

use super::orchestrator::{hitl_trigger_name, ActionKind, Authorization, HandlingAction};
use crate::lifecycle::{EventBody, HumanAction, LifecycleState, NewEvent};
use crate::model::{RecordId, UncertaintyRecord};
use crate::registry::Registry;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CommanderError {
    #[error("action {action} lacks a valid authorization ({authorized_by})")]
    UnauthorizedAction {
        action: String,
        authorized_by: Authorization,
    },
    #[error("action kind {kind:?} is outside the autonomy scope")]
    PolicyViolation { kind: ActionKind },
    #[error("unknown record {0}")]
    UnknownTarget(RecordId),
    #[error("{0} is terminal")]
    TerminalTarget(RecordId),
}

/// Whether `human` holds the latest decision on the record and it authorized
/// further handling.
fn human_authorized(registry: &Registry, record: &UncertaintyRecord, human: &str) -> bool {
    let Ok(history) = registry.history(record.id()) else {
        return false;
    };
    history
        .iter()
        .rev()
        .find_map(|a| match &a.event.body {
            EventBody::HumanDecision(d) => Some(d),
            _ => None,
        })
        .is_some_and(|d| {
            d.human.as_str() == human
                && matches!(
                    d.action,
                    HumanAction::RequestMoreEvidence | HumanAction::AuthorizeAdaptation
                )
        })
}

/// The Commander: checks authorization and turns an action into the events
/// that carry it out. Events are stamped at the registry's current time with
/// the authorizer as actor.
pub fn execute(action: &HandlingAction, registry: &Registry) -> Result<Vec<NewEvent>, CommanderError> {
    let record = registry
        .record(action.target)
        .ok_or(CommanderError::UnknownTarget(action.target))?;
    if record.is_terminal() {
        return Err(CommanderError::TerminalTarget(action.target));
    }
    let policy = registry.policy();
    let unauthorized = || CommanderError::UnauthorizedAction {
        action: action.id.clone(),
        authorized_by: action.authorized_by.clone(),
    };
    match &action.authorized_by {
        Authorization::Rule(id) => {
            let known = match hitl_trigger_name(id) {
                Some(trigger) => policy.trigger(trigger).is_some(),
                None => policy.rule(id).is_some(),
            };
            if !known {
                return Err(unauthorized());
            }
            if !policy.autonomy_scope.contains(&action.kind) {
                return Err(CommanderError::PolicyViolation { kind: action.kind });
            }
        }
        Authorization::Human(h) => {
            if !human_authorized(registry, record, h.as_str()) {
                return Err(unauthorized());
            }
        }
    }

    let body = match (action.kind, record.state()) {
        (ActionKind::Escalate, LifecycleState::Mitigated) => EventBody::OrchestratorEscalation {
            reason: format!("{} requested escalation", action.authorized_by),
            action: Some(action.clone()),
        },
        (kind, LifecycleState::Characterized) if !kind.is_handoff() => {
            EventBody::MitigationInitiated {
                action: Some(action.clone()),
            }
        }
        _ => EventBody::ActionExecuted {
            action: action.clone(),
        },
    };
    Ok(vec![NewEvent::new(
        registry.now(),
        action.target,
        action.authorized_by.actor(),
        body,
    )])
}
