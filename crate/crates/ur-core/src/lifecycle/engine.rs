use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use super::table::{rules, TransitionRule};
use super::{EventBody, EventKind, LifecycleEvent, LifecycleState, NewEvent};
use crate::mechanisms::evolve;
use crate::model::{
    compute_risk, ActorId, Category, EvidenceItem, ModelError, RecordId, Tick, UncertaintyRecord,
};
use crate::policy::Policy;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LifecycleError {
    #[error("{id} is in terminal state {state}")]
    TerminalState { id: RecordId, state: LifecycleState },
    #[error("event targets {got:?}, record is {expected}")]
    TargetMismatch {
        expected: RecordId,
        got: Option<RecordId>,
    },
    #[error("{0} is ontological and cannot be resolved")]
    IllegalResolution(RecordId),
    #[error("{0:?} events are applied by the registry, not the lifecycle engine")]
    NotRecordScoped(EventKind),
    #[error("invalid event payload: {0}")]
    InvalidPayload(String),
    #[error("rules {0:?} fired together")]
    AmbiguousRules(Vec<&'static str>),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    NoChange,
    Moved {
        from: LifecycleState,
        to: LifecycleState,
        row: u8,
        guard: &'static str,
        bypass: bool,
    },
}

impl Outcome {
    pub fn new_state(&self, prior: LifecycleState) -> LifecycleState {
        match self {
            Outcome::NoChange => prior,
            Outcome::Moved { to, .. } => *to,
        }
    }
}

/// Result of `transition`: the updated record and what happened to its state.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub record: UncertaintyRecord,
    pub outcome: Outcome,
}

/// The event-driven transition function `u(t+1) = f(u(t), e)`.
///
/// The payload (evidence, re-assessment, characterization) is folded into the
/// record first; guards then see both the prior and the folded record. Pure:
/// identical inputs always yield identical outputs.
pub fn transition(
    record: &UncertaintyRecord,
    event: &LifecycleEvent,
    policy: &Policy,
) -> Result<Transition, LifecycleError> {
    if event.target != Some(record.id) {
        return Err(LifecycleError::TargetMismatch {
            expected: record.id,
            got: event.target,
        });
    }
    if record.state.is_terminal() {
        return Err(LifecycleError::TerminalState {
            id: record.id,
            state: record.state,
        });
    }
    let kind = event.kind();
    if kind.is_registry_level() {
        return Err(LifecycleError::NotRecordScoped(kind));
    }

    let mut folded = fold_payload(record, event)?;

    let fired: Vec<&TransitionRule> = rules()
        .iter()
        .filter(|r| r.event == kind && r.from.matches(record.state))
        .filter(|r| r.guard.holds(record, &folded, event, policy))
        .collect();
    let rule = match fired.as_slice() {
        [] => {
            folded.validate()?;
            return Ok(Transition {
                record: folded,
                outcome: Outcome::NoChange,
            });
        }
        [one] => *one,
        many => {
            return Err(LifecycleError::AmbiguousRules(
                many.iter().map(|r| r.guard.name()).collect(),
            ))
        }
    };

    if rule.to == LifecycleState::Resolved && record.kind.category() == Category::Ontological {
        return Err(LifecycleError::IllegalResolution(record.id));
    }

    let from = record.state;
    folded.state = rule.to;
    folded.state_since = event.timestamp;
    folded.applied_rules.clear();
    folded.claimed_by = None;
    if rule.to == LifecycleState::Escalated {
        folded.escalation = Some(event.id);
    }
    if from == LifecycleState::Escalated && rule.to == LifecycleState::Mitigated {
        folded.oscillations += 1;
    }
    if rule.residual {
        folded.residual = true;
    }
    folded.validate()?;
    Ok(Transition {
        record: folded,
        outcome: Outcome::Moved {
            from,
            to: rule.to,
            row: rule.row,
            guard: rule.guard.name(),
            bypass: rule.bypass,
        },
    })
}

fn fold_payload(
    record: &UncertaintyRecord,
    event: &LifecycleEvent,
) -> Result<UncertaintyRecord, LifecycleError> {
    let mut out = record.clone();
    if let Some(action) = event.body.handling_action() {
        if let Some(rule) = action.authorized_by.rule_id() {
            out.applied_rules.insert(rule.to_string());
        }
    }
    match &event.body {
        EventBody::CharacterizationCompleted { assessment } => {
            if record.state == LifecycleState::Detected {
                out.scope = assessment.scope.clone();
                out.risk = compute_risk(assessment.severity, assessment.likelihood)?;
                out.expiry = assessment.expiry;
                if assessment.ontological_ctx.is_some() {
                    out.ontological_ctx = assessment.ontological_ctx.clone();
                }
            }
        }
        EventBody::EvidenceAccumulated {
            evidence,
            reassessment,
            ..
        } => {
            check_evidence(record, evidence, event.timestamp)?;
            let evolution = evolve(record, evidence, reassessment.as_ref())?;
            out.evidence.extend(evidence.iter().cloned());
            out.confidence = evolution.confidence;
            out.risk = evolution.risk;
        }
        EventBody::TimerElapsed { deadline } => {
            let mut item = EvidenceItem::timer(*deadline);
            item.id = crate::model::EvidenceId::issued(event.id, 0);
            item.timestamp = event.timestamp;
            out.evidence.push(item);
        }
        EventBody::TaskClaimed { task, human } => {
            if record.state != LifecycleState::Escalated || record.escalation != Some(*task) {
                return Err(LifecycleError::InvalidPayload(format!(
                    "task {task} is not open on {}",
                    record.id
                )));
            }
            if let Some(other) = &record.claimed_by {
                if other != human {
                    return Err(LifecycleError::InvalidPayload(format!(
                        "task {task} already claimed by {other}"
                    )));
                }
            }
            out.claimed_by = Some(human.clone());
        }
        EventBody::HumanDecision(d) if d.justification.trim().is_empty() => {
            return Err(LifecycleError::InvalidPayload(
                "human decision requires a justification".into(),
            ));
        }
        _ => {}
    }
    Ok(out)
}

fn check_evidence(
    record: &UncertaintyRecord,
    items: &[EvidenceItem],
    at: Tick,
) -> Result<(), LifecycleError> {
    let mut last = record.evidence.last().map(|e| e.timestamp).unwrap_or(Tick::ZERO);
    for item in items {
        item.validate()?;
        if item.timestamp < last || item.timestamp > at {
            return Err(LifecycleError::InvalidPayload(format!(
                "evidence {} stamped {} outside [{last}, {at}]",
                item.id, item.timestamp
            )));
        }
        if record.evidence.iter().any(|e| e.id == item.id) {
            return Err(LifecycleError::InvalidPayload(format!(
                "duplicate evidence id {}",
                item.id
            )));
        }
        last = item.timestamp;
    }
    Ok(())
}

/// States reachable in one step from `state` under some event and guard.
pub fn legal_targets(state: LifecycleState, category: Category) -> BTreeSet<LifecycleState> {
    rules()
        .iter()
        .filter(|r| r.from.matches(state))
        .map(|r| r.to)
        .filter(|to| !(category == Category::Ontological && *to == LifecycleState::Resolved))
        .collect()
}

/// One `TimerElapsed` event per live record whose deadline is at or before `now`.
///
/// Applying the events expires every such record, so a second call over the
/// updated records yields nothing.
pub fn check_timers<'a>(
    records: impl IntoIterator<Item = &'a UncertaintyRecord>,
    now: Tick,
) -> Vec<NewEvent> {
    records
        .into_iter()
        .filter(|r| !r.state.is_terminal())
        .filter_map(|r| r.expiry.filter(|tau| *tau <= now).map(|tau| (r.id, tau)))
        .map(|(id, deadline)| {
            NewEvent::new(
                now,
                id,
                ActorId::new("timer"),
                EventBody::TimerElapsed { deadline },
            )
        })
        .collect()
}
