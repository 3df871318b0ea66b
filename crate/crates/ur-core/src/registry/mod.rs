//! Event-sourced store of uncertainty records.
//!
//! Every mutation is an appended [`LifecycleEvent`]; the records, the
//! dependency graph and the audit trail are a fold over the log. Risk
//! propagation runs on every append that changes a record's risk, so the
//! registry is always at the propagation fixed point.

mod graph;
mod log;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use log::{Edge, EventLog, RegistrySnapshot, FORMAT_VERSION};

use crate::lifecycle::{
    transition, EventBody, LifecycleError, LifecycleEvent, LifecycleState, NewEvent, Outcome,
    Reassessment,
};
use crate::model::{
    ActorId, Category, EventId, EvidenceId, EvidenceItem, EvidenceSource, Family, Leaf,
    ModelError, Polarity, RecordDraft, RecordId, Tick, UncertaintyRecord,
};
use crate::policy::Policy;
use graph::Edges;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegistryError {
    #[error("unknown record {0}")]
    UnknownTarget(RecordId),
    #[error("{0:?} event carries no target")]
    MissingTarget(crate::lifecycle::EventKind),
    #[error("event at {got} is older than registry time {now}")]
    StaleTimestamp { now: Tick, got: Tick },
    #[error("edge {upstream} -> {downstream} would close a cycle")]
    CycleRejected {
        upstream: RecordId,
        downstream: RecordId,
    },
    #[error("invalid event: {0}")]
    InvalidEvent(String),
    #[error("corrupt log: {0}")]
    CorruptLog(String),
    #[error(transparent)]
    Lifecycle(#[from] LifecycleError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One applied event with the state change it caused.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub event: LifecycleEvent,
    pub prior_state: Option<LifecycleState>,
    pub new_state: Option<LifecycleState>,
    pub guard_fired: Option<String>,
    /// Transition-table row that fired.
    pub row: Option<u8>,
    /// Set when the row is an engine completion rather than a core path.
    pub bypass: bool,
    pub actor: ActorId,
    pub policy_version: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecordFilter {
    pub state: Option<LifecycleState>,
    pub category: Option<Category>,
    pub family: Option<Family>,
    pub leaf: Option<Leaf>,
    /// Records whose scope contains this identifier.
    pub scope: Option<String>,
    pub min_risk: Option<f64>,
    /// Creator or belief agent.
    pub actor: Option<ActorId>,
}

impl RecordFilter {
    pub fn matches(&self, r: &UncertaintyRecord) -> bool {
        self.state.is_none_or(|s| r.state() == s)
            && self.category.is_none_or(|c| r.kind().category() == c)
            && self.family.is_none_or(|f| r.kind().family() == f)
            && self.leaf.is_none_or(|l| r.kind().leaf() == l)
            && self.scope.as_ref().is_none_or(|s| r.scope().contains(s))
            && self.min_risk.is_none_or(|m| r.risk().risk >= m)
            && self.actor.as_ref().is_none_or(|a| {
                &r.provenance().created_by == a || r.belief_agent() == a
            })
    }
}

impl NewEvent {
    /// A record-creation event. The registry assigns the record id.
    pub fn create(
        timestamp: Tick,
        actor: impl Into<ActorId>,
        draft: RecordDraft,
    ) -> Result<NewEvent, ModelError> {
        let record = UncertaintyRecord::from_draft(RecordId(0), draft)?;
        Ok(NewEvent {
            timestamp,
            target: None,
            actor: actor.into(),
            body: EventBody::RecordCreated {
                record: Box::new(record),
            },
        })
    }

    /// A dependency edge `upstream -> downstream`.
    pub fn link(
        timestamp: Tick,
        actor: impl Into<ActorId>,
        upstream: RecordId,
        downstream: RecordId,
        attenuation: f64,
    ) -> NewEvent {
        NewEvent::new(
            timestamp,
            downstream,
            actor,
            EventBody::DependencyLinked {
                upstream,
                attenuation,
            },
        )
    }
}

#[derive(Debug, Clone)]
pub struct Registry {
    initial_policy: Policy,
    policy: Policy,
    records: BTreeMap<RecordId, UncertaintyRecord>,
    edges: Edges,
    log: Vec<LifecycleEvent>,
    audit: Vec<AuditEntry>,
    now: Tick,
}

impl Registry {
    pub fn new(policy: Policy) -> Self {
        Registry {
            initial_policy: policy.clone(),
            policy,
            records: BTreeMap::new(),
            edges: Edges::new(),
            log: Vec::new(),
            audit: Vec::new(),
            now: Tick::ZERO,
        }
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn now(&self) -> Tick {
        self.now
    }

    /// Moves the clock forward without logging anything.
    pub fn advance_to(&mut self, t: Tick) -> Result<(), RegistryError> {
        if t < self.now {
            return Err(RegistryError::StaleTimestamp {
                now: self.now,
                got: t,
            });
        }
        self.now = t;
        Ok(())
    }

    pub fn record(&self, id: RecordId) -> Option<&UncertaintyRecord> {
        self.records.get(&id)
    }

    pub fn records(&self) -> impl Iterator<Item = &UncertaintyRecord> {
        self.records.values()
    }

    pub fn attenuation(&self, upstream: RecordId, downstream: RecordId) -> Option<f64> {
        self.edges.get(&(upstream, downstream)).copied()
    }

    pub fn log(&self) -> &[LifecycleEvent] {
        &self.log
    }

    pub fn audit(&self) -> &[AuditEntry] {
        &self.audit
    }

    pub fn last_event_id(&self) -> EventId {
        self.log.last().map(|e| e.id).unwrap_or(EventId(0))
    }

    pub fn event_log(&self) -> EventLog {
        EventLog {
            policy: self.initial_policy.clone(),
            events: self.log.clone(),
        }
    }

    /// Appends an event, applies it, and runs any propagation it triggers.
    ///
    /// Returns the entry for `event` followed by entries for derived
    /// propagation events. On error nothing is logged.
    pub fn append(&mut self, event: NewEvent) -> Result<Vec<AuditEntry>, RegistryError> {
        let target = event.target;
        let prior_risk = target.and_then(|t| self.records.get(&t)).map(|r| r.risk());
        let propagate_from = match &event.body {
            EventBody::DependencyLinked { upstream, .. } => Some(*upstream),
            EventBody::EvidenceAccumulated {
                derived_from: Some(_),
                ..
            } => None,
            _ => target,
        };
        let entry = self.commit(event)?;
        let mut out = vec![entry];
        if let Some(root) = propagate_from {
            let changed = match out[0].event.body {
                EventBody::DependencyLinked { .. } => true,
                _ => self.records.get(&root).map(|r| r.risk()) != prior_risk,
            };
            if changed {
                out.extend(self.propagate(root)?);
            }
        }
        Ok(out)
    }

    pub fn link(
        &mut self,
        upstream: RecordId,
        downstream: RecordId,
        attenuation: f64,
        actor: impl Into<ActorId>,
    ) -> Result<Vec<AuditEntry>, RegistryError> {
        self.append(NewEvent::link(self.now, actor, upstream, downstream, attenuation))
    }

    fn commit(&mut self, event: NewEvent) -> Result<AuditEntry, RegistryError> {
        if event.timestamp < self.now {
            return Err(RegistryError::StaleTimestamp {
                now: self.now,
                got: event.timestamp,
            });
        }
        let id = self.last_event_id().next();
        let mut event = event.into_event(id);
        match &mut event.body {
            EventBody::RecordCreated { record } => {
                let rid = RecordId(self.records.len() as u64 + 1);
                record.id = rid;
                event.target = Some(rid);
            }
            EventBody::EvidenceAccumulated { evidence, .. } => {
                for (i, item) in evidence.iter_mut().enumerate() {
                    item.id = EvidenceId::issued(id, i);
                    item.timestamp = event.timestamp;
                }
            }
            _ => {}
        }
        self.apply(event)
    }

    /// Applies an already-numbered event. Validates everything before
    /// mutating, so a failed event leaves the registry untouched.
    fn apply(&mut self, event: LifecycleEvent) -> Result<AuditEntry, RegistryError> {
        let (prior_state, new_state, outcome) = match &event.body {
            EventBody::RecordCreated { record } => {
                let expected = RecordId(self.records.len() as u64 + 1);
                if record.id != expected || event.target != Some(expected) {
                    return Err(RegistryError::InvalidEvent(format!(
                        "record creation must target {expected}"
                    )));
                }
                if record.state != LifecycleState::Detected
                    || !record.evidence.is_empty()
                    || !record.upstream.is_empty()
                    || !record.downstream.is_empty()
                {
                    return Err(RegistryError::InvalidEvent(
                        "new records start Detected with no evidence or links".into(),
                    ));
                }
                record.validate()?;
                self.records.insert(expected, (**record).clone());
                (None, Some(LifecycleState::Detected), None)
            }
            EventBody::DependencyLinked {
                upstream,
                attenuation,
            } => {
                let down = event
                    .target
                    .ok_or(RegistryError::MissingTarget(event.kind()))?;
                let state = self.require(down)?.state;
                self.require(*upstream)?;
                if !(attenuation.is_finite() && (0.0..=1.0).contains(attenuation)) {
                    return Err(ModelError::OutOfRange {
                        field: "attenuation",
                        value: *attenuation,
                    }
                    .into());
                }
                if self.edges.contains_key(&(*upstream, down)) {
                    return Err(RegistryError::InvalidEvent(format!(
                        "{upstream} is already linked to {down}"
                    )));
                }
                if graph::reaches(&self.edges, down, *upstream) {
                    return Err(RegistryError::CycleRejected {
                        upstream: *upstream,
                        downstream: down,
                    });
                }
                self.edges.insert((*upstream, down), *attenuation);
                self.records
                    .get_mut(upstream)
                    .expect("checked")
                    .downstream
                    .insert(down);
                self.records.get_mut(&down).expect("checked").upstream.insert(*upstream);
                (Some(state), Some(state), None)
            }
            EventBody::PolicyInstalled { policy } => {
                let violations = policy.violations();
                if !violations.is_empty() {
                    return Err(RegistryError::InvalidEvent(format!(
                        "policy rejected: {}",
                        violations.join("; ")
                    )));
                }
                self.policy = (**policy).clone();
                (None, None, None)
            }
            _ => {
                let target = event
                    .target
                    .ok_or(RegistryError::MissingTarget(event.kind()))?;
                let record = self.require(target)?;
                let prior = record.state;
                let t = transition(record, &event, &self.policy)?;
                let new = t.record.state;
                self.records.insert(target, t.record);
                (Some(prior), Some(new), Some(t.outcome))
            }
        };
        let (guard_fired, row, bypass) = match outcome {
            Some(Outcome::Moved {
                guard, row, bypass, ..
            }) => (Some(guard.to_string()), Some(row), bypass),
            _ => (None, None, false),
        };
        self.now = event.timestamp;
        let entry = AuditEntry {
            actor: event.actor.clone(),
            event: event.clone(),
            prior_state,
            new_state,
            guard_fired,
            row,
            bypass,
            policy_version: self.policy.version.clone(),
        };
        self.log.push(event);
        self.audit.push(entry.clone());
        Ok(entry)
    }

    fn require(&self, id: RecordId) -> Result<&UncertaintyRecord, RegistryError> {
        self.records.get(&id).ok_or(RegistryError::UnknownTarget(id))
    }

    /// Attenuated max-risk flooding from `changed`.
    ///
    /// Visits `changed` and its descendants in topological order; each live
    /// record's likelihood is raised to the largest `risk(u) * alpha(u, d)`
    /// over its immediate upstream records. Every raise is logged as a
    /// derived evidence event. Never lowers a likelihood; a second call with
    /// no intervening events does nothing.
    pub fn propagate(&mut self, changed: RecordId) -> Result<Vec<AuditEntry>, RegistryError> {
        self.require(changed)?;
        let mut out = Vec::new();
        for d in graph::downstream_order(&self.edges, changed) {
            let rec = &self.records[&d];
            if rec.is_terminal() {
                continue;
            }
            let derived = rec
                .upstream
                .iter()
                .map(|u| self.records[u].risk.risk * self.edges[&(*u, d)])
                .fold(f64::NEG_INFINITY, f64::max);
            let own = rec.risk.likelihood;
            if derived > own {
                let item = EvidenceItem::draft(
                    EvidenceSource::Observation,
                    Polarity::Conflicting,
                    derived - own,
                    format!("risk propagated from {changed}"),
                    ActorId::registry(),
                )?;
                let event = NewEvent::new(
                    self.now,
                    d,
                    ActorId::registry(),
                    EventBody::EvidenceAccumulated {
                        evidence: vec![item],
                        reassessment: Some(Reassessment {
                            severity: None,
                            likelihood: Some(derived),
                        }),
                        derived_from: Some(changed),
                        task: None,
                    },
                );
                out.push(self.commit(event)?);
            }
        }
        Ok(out)
    }

    /// Matching records ordered by id.
    pub fn query(&self, filter: &RecordFilter) -> Vec<&UncertaintyRecord> {
        self.records.values().filter(|r| filter.matches(r)).collect()
    }

    /// The record's causal chain: every entry targeting it and every link it
    /// takes part in.
    pub fn history(&self, id: RecordId) -> Result<Vec<&AuditEntry>, RegistryError> {
        self.require(id)?;
        Ok(self
            .audit
            .iter()
            .filter(|a| {
                a.event.target == Some(id)
                    || matches!(a.event.body, EventBody::DependencyLinked { upstream, .. } if upstream == id)
            })
            .collect())
    }

    pub fn snapshot(&self) -> RegistrySnapshot {
        RegistrySnapshot {
            format_version: FORMAT_VERSION,
            records: self.records.clone(),
            edges: self
                .edges
                .iter()
                .map(|((u, d), a)| Edge {
                    upstream: *u,
                    downstream: *d,
                    attenuation: *a,
                })
                .collect(),
            last_event_id: self.last_event_id(),
            now: self.now,
            policy_version: self.policy.version.clone(),
        }
    }

    /// The snapshot as the log alone determines it: the clock stands at the
    /// last logged event rather than at any later tick reached without one.
    pub fn log_snapshot(&self) -> RegistrySnapshot {
        RegistrySnapshot {
            now: self.log.last().map(|e| e.timestamp).unwrap_or(Tick::ZERO),
            ..self.snapshot()
        }
    }

    /// Rebuilds a registry by re-applying a persisted log. Derived events
    /// are read from the log, not recomputed.
    pub fn replay(log: &EventLog) -> Result<Registry, RegistryError> {
        Self::replay_with(log, |_, _| {})
    }

    /// Like [`Registry::replay`], calling `visit` after each applied event.
    pub fn replay_with(
        log: &EventLog,
        mut visit: impl FnMut(&AuditEntry, &Registry),
    ) -> Result<Registry, RegistryError> {
        let mut reg = Registry::new(log.policy.clone());
        for (i, event) in log.events.iter().enumerate() {
            let expected = EventId(i as u64 + 1);
            if event.id != expected {
                return Err(RegistryError::CorruptLog(format!(
                    "expected event {expected}, found {}",
                    event.id
                )));
            }
            if event.timestamp < reg.now {
                return Err(RegistryError::CorruptLog(format!(
                    "event {} at {} precedes {}",
                    event.id, event.timestamp, reg.now
                )));
            }
            let entry = reg
                .apply(event.clone())
                .map_err(|e| RegistryError::CorruptLog(format!("event {}: {e}", event.id)))?;
            visit(&entry, &reg);
        }
        Ok(reg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::test_draft;

    fn reg_with(n: usize) -> Registry {
        let mut reg = Registry::new(Policy::default());
        for _ in 0..n {
            reg.append(NewEvent::create(Tick(1), "t", test_draft(Leaf::Missing)).unwrap())
                .unwrap();
        }
        reg
    }

    #[test]
    fn creation_base_case() {
        let reg = reg_with(1);
        let snap = reg.snapshot();
        assert_eq!(snap.records.len(), 1);
        assert_eq!(reg.audit().len(), 1);
        assert_eq!(reg.audit()[0].new_state, Some(LifecycleState::Detected));
    }

    #[test]
    fn stale_timestamp() {
        let mut reg = reg_with(1);
        reg.advance_to(Tick(7)).unwrap();
        let ev = NewEvent::new(Tick(4), RecordId(1), "a", EventBody::evidence(vec![]));
        assert_eq!(
            reg.append(ev),
            Err(RegistryError::StaleTimestamp {
                now: Tick(7),
                got: Tick(4)
            })
        );
        assert_eq!(reg.log().len(), 1);
    }

    #[test]
    fn unknown_target() {
        let mut reg = reg_with(1);
        let ev = NewEvent::new(Tick(1), RecordId(9), "a", EventBody::evidence(vec![]));
        assert_eq!(reg.append(ev), Err(RegistryError::UnknownTarget(RecordId(9))));
    }

    #[test]
    fn cycles_rejected() {
        let mut reg = reg_with(3);
        let (a, b, c) = (RecordId(1), RecordId(2), RecordId(3));
        reg.link(a, b, 0.5, "t").unwrap();
        assert!(matches!(
            reg.link(b, a, 0.5, "t"),
            Err(RegistryError::CycleRejected { .. })
        ));
        assert!(matches!(
            reg.link(a, a, 1.0, "t"),
            Err(RegistryError::CycleRejected { .. })
        ));
        reg.link(b, c, 1.0, "t").unwrap();
        assert!(matches!(
            reg.link(c, a, 1.0, "t"),
            Err(RegistryError::CycleRejected { .. })
        ));
        assert!(matches!(
            reg.link(a, c, 1.5, "t"),
            Err(RegistryError::Model(ModelError::OutOfRange { .. }))
        ));
        assert!(reg.record(a).unwrap().downstream().contains(&b));
        assert!(reg.record(b).unwrap().upstream().contains(&a));
    }

    #[test]
    fn query_by_risk_and_state() {
        let empty = Registry::new(Policy::default());
        let f = RecordFilter {
            state: Some(LifecycleState::Escalated),
            ..Default::default()
        };
        assert!(empty.query(&f).is_empty());

        let mut reg = Registry::new(Policy::default());
        for lik in [0.4, 0.6] {
            let mut d = test_draft(Leaf::Noise);
            d.severity = 1.0;
            d.likelihood = lik;
            reg.append(NewEvent::create(Tick(1), "t", d).unwrap()).unwrap();
        }
        let f = RecordFilter {
            min_risk: Some(0.5),
            ..Default::default()
        };
        let hits: Vec<_> = reg.query(&f).iter().map(|r| r.id()).collect();
        assert_eq!(hits, vec![RecordId(2)]);
    }

    #[test]
    fn evidence_is_stamped() {
        let mut reg = reg_with(1);
        let item = EvidenceItem::draft(
            EvidenceSource::Observation,
            Polarity::Supporting,
            0.5,
            "x",
            "a",
        )
        .unwrap();
        reg.append(NewEvent::new(
            Tick(3),
            RecordId(1),
            "a",
            EventBody::evidence(vec![item.clone(), item]),
        ))
        .unwrap();
        let ev = reg.record(RecordId(1)).unwrap().evidence();
        assert_eq!(ev[0].id.to_string(), "E2.0");
        assert_eq!(ev[1].id.to_string(), "E2.1");
        assert_eq!(ev[1].timestamp, Tick(3));
        assert_eq!(reg.now(), Tick(3));
    }

    #[test]
    fn failed_events_are_not_logged() {
        let mut reg = reg_with(1);
        let before = reg.snapshot().to_canonical();
        let ev = NewEvent::new(
            Tick(2),
            RecordId(1),
            "a",
            EventBody::HumanDecision(crate::lifecycle::HumanDecisionPayload {
                task: EventId(1),
                human: "h".into(),
                role: crate::lifecycle::HumanRole::Judgment,
                action: crate::lifecycle::HumanAction::AcceptRisk,
                justification: " ".into(),
            }),
        );
        assert!(reg.append(ev).is_err());
        assert_eq!(reg.snapshot().to_canonical(), before);
    }

    #[test]
    fn replay_of_empty_log() {
        let reg = Registry::replay(&EventLog::new(Policy::default())).unwrap();
        assert!(reg.snapshot().records.is_empty());
        assert_eq!(reg.last_event_id(), EventId(0));
    }

    #[test]
    fn replay_rejects_gaps() {
        let reg = reg_with(3);
        let mut log = reg.event_log();
        log.events.remove(1);
        assert!(matches!(
            Registry::replay(&log),
            Err(RegistryError::CorruptLog(_))
        ));
    }
}
