//! Pipeline stages that read the registry, run a mechanism, and append the
//! resulting events.

use thiserror::Error;

use crate::lifecycle::check_timers;
use crate::mechanisms::{
    assessment, attach_references, characterize, construct, detect, duplicate_of, execute,
    orchestrate, synthesize, upstream_links, CommanderError, ConstructError, DetectorRule,
    Proposal, Signal,
};
use crate::model::{ActorId, ModelError, RecordId, UncertaintyRecord};
use crate::registry::{AuditEntry, Registry, RegistryError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GovernError {
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Commander(#[from] CommanderError),
    #[error(transparent)]
    Construct(#[from] ConstructError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn append_all(
    registry: &mut Registry,
    events: impl IntoIterator<Item = crate::lifecycle::NewEvent>,
) -> Result<Vec<AuditEntry>, GovernError> {
    let mut out = Vec::new();
    for e in events {
        out.extend(registry.append(e)?);
    }
    Ok(out)
}

/// Reasoner, detectors and Constructor over one observed signal.
///
/// Evidence for existing records on the signal's topic is appended before
/// new records are admitted, so fresh detections do not receive the
/// evidence that produced them.
pub fn ingest(
    registry: &mut Registry,
    mut signal: Signal,
    rules: &[DetectorRule],
) -> Result<Vec<AuditEntry>, GovernError> {
    let records: Vec<&UncertaintyRecord> = registry.records().collect();
    attach_references(&mut signal, &records);
    let proposals = detect(&signal, rules);
    let evidence = synthesize(&signal, &records)?;
    let mut out = append_all(registry, evidence)?;
    for p in &proposals {
        out.extend(admit(registry, p, &[])?);
    }
    Ok(out)
}

/// Creates, characterizes and links a record for `proposal`, unless a live
/// record of the same kind already stands for its topic.
pub fn admit(
    registry: &mut Registry,
    proposal: &Proposal,
    extra_upstream: &[(RecordId, f64)],
) -> Result<Vec<AuditEntry>, GovernError> {
    if duplicate_of(proposal, registry.records()).is_some() {
        return Ok(Vec::new());
    }
    let mut links = upstream_links(proposal, registry.records());
    for (u, a) in extra_upstream {
        if !links.iter().any(|(x, _)| x == u) {
            links.push((*u, *a));
        }
    }
    let mut out = registry.append(construct(proposal)?)?;
    let id = out[0].event.target.expect("creation events carry their record id");
    let record = registry.record(id).expect("just created");
    let ev = characterize(record, assessment(proposal), registry.now())?;
    out.extend(registry.append(ev)?);
    let actor = ActorId::new("constructor");
    for (u, a) in links {
        out.extend(registry.link(u, id, a, actor.clone())?);
    }
    Ok(out)
}

/// Expires every live record whose deadline has passed.
pub fn expire_due(registry: &mut Registry) -> Result<Vec<AuditEntry>, GovernError> {
    let events = check_timers(registry.records(), registry.now());
    append_all(registry, events)
}

/// One Orchestrator pass over the current snapshot, executed by the Commander.
/// Actions whose target became terminal earlier in the pass are dropped.
pub fn adapt(registry: &mut Registry) -> Result<Vec<AuditEntry>, GovernError> {
    let actions = orchestrate(&registry.snapshot(), registry.policy());
    let mut out = Vec::new();
    for action in &actions {
        match execute(action, registry) {
            Ok(events) => out.extend(append_all(registry, events)?),
            Err(CommanderError::TerminalTarget(_)) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}
