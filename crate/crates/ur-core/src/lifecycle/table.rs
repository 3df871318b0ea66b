//! The transition table as data.
//!
//! Rows are keyed by `(from, event kind)`; within a key the guards are
//! mutually exclusive whenever the policy satisfies `theta_risk <= theta_esc`.

use serde::Serialize;

use super::{EventBody, EventKind, HumanAction, LifecycleEvent, LifecycleState};
use crate::model::{Category, UncertaintyRecord};
use crate::policy::Policy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StateMatch {
    Exactly(LifecycleState),
    AnyLive,
}

impl StateMatch {
    pub fn matches(self, state: LifecycleState) -> bool {
        match self {
            StateMatch::Exactly(s) => s == state,
            StateMatch::AnyLive => !state.is_terminal(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Guard {
    Always,
    /// severity <= theta_sev, risk <= theta_risk, epistemological.
    ResolutionThresholdsMet,
    /// risk > theta_esc.
    RiskAboveEscalation,
    /// risk fell and is now below theta_esc.
    RiskRefinedBelowEscalation,
    /// Human asked for more evidence or authorized adaptation.
    HumanReturnsToMitigation,
    HumanAcceptsRisk,
    HumanResolves,
    /// event timestamp >= expiry.
    DeadlineReached,
}

impl Guard {
    pub fn name(self) -> &'static str {
        match self {
            Guard::Always => "always",
            Guard::ResolutionThresholdsMet => "resolution_thresholds_met",
            Guard::RiskAboveEscalation => "risk_above_escalation",
            Guard::RiskRefinedBelowEscalation => "risk_refined_below_escalation",
            Guard::HumanReturnsToMitigation => "human_returns_to_mitigation",
            Guard::HumanAcceptsRisk => "human_accepts_risk",
            Guard::HumanResolves => "human_resolves",
            Guard::DeadlineReached => "deadline_reached",
        }
    }

    /// `prior` is the record before the event payload was folded in,
    /// `folded` the record after.
    pub fn holds(
        self,
        prior: &UncertaintyRecord,
        folded: &UncertaintyRecord,
        event: &LifecycleEvent,
        policy: &Policy,
    ) -> bool {
        let th = &policy.thresholds;
        let human = match &event.body {
            EventBody::HumanDecision(d) => Some(d.action),
            _ => None,
        };
        match self {
            Guard::Always => true,
            Guard::ResolutionThresholdsMet => {
                folded.risk.severity <= th.theta_sev
                    && folded.risk.risk <= th.theta_risk
                    && folded.kind.category() == Category::Epistemological
            }
            Guard::RiskAboveEscalation => folded.risk.risk > th.theta_esc,
            Guard::RiskRefinedBelowEscalation => {
                folded.risk.risk < prior.risk.risk && folded.risk.risk < th.theta_esc
            }
            Guard::HumanReturnsToMitigation => matches!(
                human,
                Some(HumanAction::RequestMoreEvidence | HumanAction::AuthorizeAdaptation)
            ),
            Guard::HumanAcceptsRisk => human == Some(HumanAction::AcceptRisk),
            Guard::HumanResolves => human == Some(HumanAction::Resolve),
            Guard::DeadlineReached => folded.expiry.is_some_and(|tau| event.timestamp >= tau),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TransitionRule {
    pub row: u8,
    pub from: StateMatch,
    pub event: EventKind,
    pub guard: Guard,
    pub to: LifecycleState,
    /// The record expires carrying residual uncertainty.
    pub residual: bool,
    /// Engine-completed path rather than one of the core lifecycle moves.
    pub bypass: bool,
}

const fn rule(
    row: u8,
    from: StateMatch,
    event: EventKind,
    guard: Guard,
    to: LifecycleState,
    residual: bool,
    bypass: bool,
) -> TransitionRule {
    TransitionRule {
        row,
        from,
        event,
        guard,
        to,
        residual,
        bypass,
    }
}

use LifecycleState::*;
use StateMatch::*;

#[rustfmt::skip]
pub const TRANSITION_TABLE: [TransitionRule; 11] = [
    rule(1, Exactly(Detected), EventKind::CharacterizationCompleted, Guard::Always, Characterized, false, false),
    rule(2, Exactly(Characterized), EventKind::MitigationInitiated, Guard::Always, Mitigated, false, false),
    rule(3, Exactly(Mitigated), EventKind::EvidenceAccumulated, Guard::ResolutionThresholdsMet, Resolved, false, false),
    rule(4, Exactly(Mitigated), EventKind::DecisionCommitted, Guard::Always, Expired, true, false),
    rule(5, Exactly(Mitigated), EventKind::EvidenceAccumulated, Guard::RiskAboveEscalation, Escalated, false, false),
    rule(5, Exactly(Mitigated), EventKind::OrchestratorEscalation, Guard::Always, Escalated, false, false),
    rule(6, Exactly(Escalated), EventKind::EvidenceAccumulated, Guard::RiskRefinedBelowEscalation, Mitigated, false, false),
    rule(6, Exactly(Escalated), EventKind::HumanDecision, Guard::HumanReturnsToMitigation, Mitigated, false, false),
    rule(7, Exactly(Escalated), EventKind::HumanDecision, Guard::HumanAcceptsRisk, Expired, true, false),
    rule(8, Exactly(Escalated), EventKind::HumanDecision, Guard::HumanResolves, Resolved, false, true),
    rule(9, AnyLive, EventKind::TimerElapsed, Guard::DeadlineReached, Expired, true, true),
];

pub fn rules() -> &'static [TransitionRule] {
    &TRANSITION_TABLE
}

/// Machine-readable export of the table for consoles and external oracles.
pub fn transition_table_document() -> serde_json::Value {
    let states: Vec<_> = LifecycleState::ALL
        .iter()
        .map(|s| {
            serde_json::json!({
                "state": s,
                "terminal": s.is_terminal(),
            })
        })
        .collect();
    let rules: Vec<_> = rules()
        .iter()
        .map(|r| {
            let from = match r.from {
                Exactly(s) => serde_json::to_value(s).expect("state serializes"),
                AnyLive => serde_json::Value::String("any_live".into()),
            };
            serde_json::json!({
                "row": r.row,
                "from": from,
                "event": r.event,
                "guard": r.guard.name(),
                "to": r.to,
                "residual": r.residual,
                "bypass": r.bypass,
            })
        })
        .collect();
    serde_json::json!({
        "format_version": 1,
        "states": states,
        "event_kinds": EventKind::LIFECYCLE,
        "rules": rules,
        "ontological_excluded_targets": [Resolved],
    })
}
