//! The Constructor: turns detector proposals into records and characterizes them.

use std::collections::BTreeMap;

use thiserror::Error;

use super::detector::Proposal;
use crate::lifecycle::{Assessment, EventBody, LifecycleState, NewEvent};
use crate::model::{
    ModelError, OntologicalContext, Provenance, RecordDraft, RecordId, Tick, UncertaintyRecord,
};

const ACTOR: &str = "constructor";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConstructError {
    #[error("{id} is {state}, characterization needs Detected")]
    WrongState { id: RecordId, state: LifecycleState },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A creation event for a new Detected record. Ontological kinds get their
/// context attached from the detection detail.
pub fn construct(proposal: &Proposal) -> Result<NewEvent, ModelError> {
    let draft = RecordDraft {
        kind: proposal.kind,
        scope: proposal.scope.clone(),
        ontological_ctx: OntologicalContext::for_kind(proposal.kind, proposal.detail.clone()),
        provenance: Provenance {
            created_by: proposal.source_agent.clone(),
            created_at: proposal.timestamp,
            valid_from: proposal.timestamp,
            source_artifact: proposal.topic.clone(),
        },
        confidence: Some(proposal.confidence),
        severity: proposal.severity,
        likelihood: proposal.likelihood,
        expiry: proposal.expiry,
        belief_statement: proposal.belief_statement.clone(),
        belief_agent: proposal.belief_agent.clone(),
        topic: proposal.topic.clone(),
        annotations: BTreeMap::from([
            ("detector".to_string(), proposal.rule_id.clone()),
            ("detail".to_string(), proposal.detail.clone()),
        ]),
    };
    NewEvent::create(proposal.timestamp, ACTOR, draft)
}

pub fn assessment(proposal: &Proposal) -> Assessment {
    Assessment {
        scope: proposal.scope.clone(),
        severity: proposal.severity,
        likelihood: proposal.likelihood,
        expiry: proposal.expiry,
        ontological_ctx: None,
    }
}

/// The row-1 event applying `assessment` to a Detected record.
pub fn characterize(
    record: &UncertaintyRecord,
    assessment: Assessment,
    now: Tick,
) -> Result<NewEvent, ConstructError> {
    if record.state() != LifecycleState::Detected {
        return Err(ConstructError::WrongState {
            id: record.id(),
            state: record.state(),
        });
    }
    crate::model::compute_risk(assessment.severity, assessment.likelihood)?;
    Ok(NewEvent::new(
        now,
        record.id(),
        ACTOR,
        EventBody::CharacterizationCompleted { assessment },
    ))
}

/// A live record already standing for the same kind on the same topic.
pub fn duplicate_of<'a>(
    proposal: &Proposal,
    records: impl IntoIterator<Item = &'a UncertaintyRecord>,
) -> Option<RecordId> {
    records
        .into_iter()
        .find(|r| !r.is_terminal() && r.kind() == proposal.kind && r.topic() == proposal.topic)
        .map(|r| r.id())
}

/// Existing records scoped to an artifact the proposal cites, with the
/// attenuation for the new upstream edge.
pub fn upstream_links<'a>(
    proposal: &Proposal,
    records: impl IntoIterator<Item = &'a UncertaintyRecord>,
) -> Vec<(RecordId, f64)> {
    records
        .into_iter()
        .filter(|r| !r.scope().is_disjoint(&proposal.evidence_links))
        .map(|r| (r.id(), proposal.attenuation))
        .collect()
}
