//! Escalation tasks and human decisions.
//!
//! A task is identified by the event that moved its record into Escalated.
//! Task state is never stored separately: it is read off the record and the
//! log, so the queue can be rebuilt from the registry at any time.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::governor::{admit, GovernError};
use crate::lifecycle::{
    EventBody, HumanAction, HumanDecisionPayload, HumanRole, LifecycleState, NewEvent,
};
use crate::mechanisms::{
    bind_rules, detect, execute, ActionKind, ActionTemplate, Authorization, DetectorRule,
    HandlingAction, HumanInput, Layer, Signal, SignalContent,
};
use crate::model::{
    ActorId, Category, EventId, EvidenceItem, EvidenceSource, Polarity, RecordId, RiskAssessment,
    Tick, UncertaintyKind, UncertaintyRecord,
};
use crate::registry::{AuditEntry, Registry, RegistryError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EscalationError {
    #[error("unknown escalation task {0}")]
    UnknownTask(EventId),
    #[error("wrong state: {0}")]
    WrongState(String),
    #[error("forbidden: {0}")]
    Forbidden(String),
    #[error("validation error: {0}")]
    ValidationError(String),
    #[error(transparent)]
    Govern(#[from] GovernError),
}

impl From<RegistryError> for EscalationError {
    fn from(e: RegistryError) -> Self {
        EscalationError::Govern(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Pending,
    Claimed,
    Decided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordSummary {
    pub id: RecordId,
    pub kind: UncertaintyKind,
    pub state: LifecycleState,
    pub confidence: f64,
    pub risk: RiskAssessment,
    pub belief_statement: String,
    pub topic: String,
}

impl From<&UncertaintyRecord> for RecordSummary {
    fn from(r: &UncertaintyRecord) -> Self {
        RecordSummary {
            id: r.id(),
            kind: r.kind(),
            state: r.state(),
            confidence: r.confidence(),
            risk: r.risk(),
            belief_statement: r.belief_statement().to_string(),
            topic: r.topic().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Consequences {
    pub of_action: String,
    pub of_inaction: String,
}

/// What a human needs to decide on an escalated record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscalationView {
    pub current_decision: String,
    pub unresolved_uncertainties: Vec<RecordSummary>,
    pub supporting_evidence: Vec<EvidenceItem>,
    pub conflicting_evidence: Vec<EvidenceItem>,
    /// Neutral items such as human notes and timer markers.
    pub other_evidence: Vec<EvidenceItem>,
    pub assumptions: Vec<String>,
    pub consequences: Consequences,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscalationTask {
    pub id: EventId,
    pub record: RecordId,
    pub kind: UncertaintyKind,
    pub opened_at: Tick,
    /// Guard or authorization that opened the task.
    pub opened_by: String,
    pub status: TaskStatus,
    pub claimed_by: Option<ActorId>,
    pub risk: f64,
    pub legal_actions: Vec<HumanAction>,
    pub view: EscalationView,
}

/// A decision as submitted through the console.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRequest {
    pub task: EventId,
    pub human: ActorId,
    pub role: HumanRole,
    pub action: HumanAction,
    pub justification: String,
    #[serde(default)]
    pub authorized_actions: Vec<ActionTemplate>,
}

pub fn legal_actions(kind: UncertaintyKind) -> Vec<HumanAction> {
    HumanAction::ALL
        .into_iter()
        .filter(|a| !(*a == HumanAction::Resolve && kind.category() == Category::Ontological))
        .collect()
}

fn opening_entry(registry: &Registry, task: EventId) -> Option<&AuditEntry> {
    let entry = registry.audit().get(task.0.checked_sub(1)? as usize)?;
    (entry.event.id == task
        && entry.new_state == Some(LifecycleState::Escalated)
        && entry.prior_state != Some(LifecycleState::Escalated))
    .then_some(entry)
}

fn decision_for(registry: &Registry, record: RecordId, task: EventId) -> Option<&AuditEntry> {
    registry.audit().iter().find(|a| {
        a.event.target == Some(record)
            && matches!(&a.event.body, EventBody::HumanDecision(d) if d.task == task)
    })
}

fn view(registry: &Registry, record: &UncertaintyRecord) -> EscalationView {
    let mut unresolved = vec![RecordSummary::from(record)];
    let mut assumptions = Vec::new();
    for u in record.upstream() {
        let up = registry.record(*u).expect("edges reference existing records");
        if !up.is_terminal() {
            unresolved.push(RecordSummary::from(up));
        }
        let alpha = registry.attenuation(*u, record.id()).unwrap_or(0.0);
        assumptions.push(format!(
            "{u} ({}) feeds this likelihood with attenuation {alpha}",
            up.kind()
        ));
    }
    assumptions.push(format!(
        "severity {} as last assessed; likelihood {}",
        record.risk().severity,
        record.risk().likelihood
    ));
    if let Some(ctx) = record.ontological_ctx() {
        assumptions.push(format!(
            "irreducible ({:?}): {}",
            ctx.irreducibility, ctx.indeterminacy_source
        ));
    }
    if let Some(d) = record.annotations().get("detail") {
        assumptions.push(format!("detected from: {d}"));
    }

    let split = |p: Polarity| -> Vec<EvidenceItem> {
        record
            .evidence()
            .iter()
            .filter(|e| e.polarity == p)
            .cloned()
            .collect()
    };
    let id = record.id();
    let risk = record.risk().risk;
    let mut of_action = format!(
        "accepting expires {id} with residual risk {risk:.3}; requesting evidence or authorizing adaptation returns it to mitigation"
    );
    if record.kind().category() == Category::Epistemological {
        of_action.push_str("; resolving closes it");
    }
    let of_inaction = match record.expiry() {
        Some(tau) => format!("{id} stays escalated until {tau}, then expires with residual uncertainty"),
        None => format!("{id} stays escalated and its dependents keep risk {risk:.3} upstream"),
    };
    EscalationView {
        current_decision: format!(
            "act on \"{}\" stated by {} (confidence {:.2}, risk {risk:.3})",
            record.belief_statement(),
            record.belief_agent(),
            record.confidence()
        ),
        unresolved_uncertainties: unresolved,
        supporting_evidence: split(Polarity::Supporting),
        conflicting_evidence: split(Polarity::Conflicting),
        other_evidence: split(Polarity::Neutral),
        assumptions,
        consequences: Consequences {
            of_action,
            of_inaction,
        },
    }
}

fn build(registry: &Registry, task: EventId, record: &UncertaintyRecord) -> EscalationTask {
    let opening = opening_entry(registry, task).expect("task ids are escalation events");
    let decided = decision_for(registry, record.id(), task).is_some();
    let status = if decided {
        TaskStatus::Decided
    } else if record.claimed_by().is_some() {
        TaskStatus::Claimed
    } else {
        TaskStatus::Pending
    };
    let opened_by = match &opening.event.body {
        EventBody::OrchestratorEscalation {
            action: Some(a), ..
        } => a.authorized_by.to_string(),
        _ => opening.guard_fired.clone().unwrap_or_default(),
    };
    EscalationTask {
        id: task,
        record: record.id(),
        kind: record.kind(),
        opened_at: opening.event.timestamp,
        opened_by,
        status,
        claimed_by: if decided { None } else { record.claimed_by().cloned() },
        risk: record.risk().risk,
        legal_actions: legal_actions(record.kind()),
        view: view(registry, record),
    }
}

/// Pending and claimed tasks, newest first.
pub fn list_escalations(registry: &Registry) -> Vec<EscalationTask> {
    let mut tasks: Vec<EscalationTask> = registry
        .records()
        .filter(|r| r.state() == LifecycleState::Escalated)
        .filter_map(|r| r.escalation().map(|t| build(registry, t, r)))
        .collect();
    tasks.sort_by(|a, b| b.id.cmp(&a.id));
    tasks
}

/// Any task, open or decided.
pub fn get_task(registry: &Registry, task: EventId) -> Result<EscalationTask, EscalationError> {
    let opening = opening_entry(registry, task).ok_or(EscalationError::UnknownTask(task))?;
    let rid = opening.event.target.expect("lifecycle events carry a target");
    let record = registry.record(rid).expect("audited records exist");
    Ok(build(registry, task, record))
}

fn open_record(registry: &Registry, task: EventId) -> Result<&UncertaintyRecord, EscalationError> {
    let opening = opening_entry(registry, task).ok_or(EscalationError::UnknownTask(task))?;
    let rid = opening.event.target.expect("lifecycle events carry a target");
    let record = registry.record(rid).expect("audited records exist");
    if decision_for(registry, rid, task).is_some() {
        return Err(EscalationError::WrongState(format!("task {task} already decided")));
    }
    if record.state() != LifecycleState::Escalated || record.escalation() != Some(task) {
        return Err(EscalationError::WrongState(format!(
            "task {task} is closed; {rid} is {}",
            record.state()
        )));
    }
    Ok(record)
}

pub fn claim(
    registry: &mut Registry,
    task: EventId,
    human: &ActorId,
) -> Result<Vec<AuditEntry>, EscalationError> {
    let record = open_record(registry, task)?;
    if let Some(other) = record.claimed_by() {
        if other != human {
            return Err(EscalationError::WrongState(format!(
                "task {task} already claimed by {other}"
            )));
        }
    }
    let ev = NewEvent::new(
        registry.now(),
        record.id(),
        human.clone(),
        EventBody::TaskClaimed {
            task,
            human: human.clone(),
        },
    );
    Ok(registry.append(ev)?)
}

/// Applies a human decision: the justification as human-provided evidence,
/// the decision event itself, any handling it authorizes, and a detector pass
/// over the decision text.
pub fn submit_decision(
    registry: &mut Registry,
    decision: &DecisionRequest,
    rules: &[DetectorRule],
) -> Result<Vec<AuditEntry>, EscalationError> {
    if decision.justification.trim().is_empty() {
        return Err(EscalationError::ValidationError(
            "justification must not be empty".into(),
        ));
    }
    if decision.action == HumanAction::AuthorizeAdaptation && decision.authorized_actions.is_empty()
    {
        return Err(EscalationError::ValidationError(
            "authorize_adaptation needs at least one authorized action".into(),
        ));
    }
    let record = open_record(registry, decision.task)?;
    if let Some(other) = record.claimed_by() {
        if other != &decision.human {
            return Err(EscalationError::Forbidden(format!(
                "task {} is claimed by {other}",
                decision.task
            )));
        }
    }
    if decision.action == HumanAction::Resolve && record.kind().category() == Category::Ontological
    {
        return Err(EscalationError::Forbidden(format!(
            "{} is ontological and cannot be resolved",
            record.id()
        )));
    }
    let rid = record.id();
    let (topic, scope) = (record.topic().to_string(), record.scope().clone());
    let now = registry.now();

    let (polarity, weight) = match decision.action {
        HumanAction::Resolve => (Polarity::Supporting, 1.0),
        _ => (Polarity::Neutral, 0.0),
    };
    let item = EvidenceItem::draft(
        EvidenceSource::HumanProvided,
        polarity,
        weight,
        decision.justification.clone(),
        decision.human.clone(),
    )
    .map_err(GovernError::from)?;
    let mut out = registry.append(NewEvent::new(
        now,
        rid,
        decision.human.clone(),
        EventBody::EvidenceAccumulated {
            evidence: vec![item],
            reassessment: None,
            derived_from: None,
            task: Some(decision.task),
        },
    ))?;
    out.extend(registry.append(NewEvent::new(
        now,
        rid,
        decision.human.clone(),
        EventBody::HumanDecision(HumanDecisionPayload {
            task: decision.task,
            human: decision.human.clone(),
            role: decision.role,
            action: decision.action,
            justification: decision.justification.clone(),
        }),
    ))?);

    let templates = match decision.action {
        HumanAction::RequestMoreEvidence => vec![ActionTemplate::new(ActionKind::AcquireData)],
        HumanAction::AuthorizeAdaptation => decision.authorized_actions.clone(),
        _ => Vec::new(),
    };
    for (n, t) in templates.into_iter().enumerate() {
        let action = HandlingAction {
            id: format!("decision/{}/{n}", decision.task),
            target: rid,
            kind: t.kind,
            parameters: t.parameters,
            authorized_by: Authorization::Human(decision.human.clone()),
        };
        let events = execute(&action, registry).map_err(GovernError::from)?;
        for e in events {
            out.extend(registry.append(e)?);
        }
    }

    let signal = Signal {
        timestamp: now,
        layer: Layer::Interaction,
        source_agent: decision.human.clone(),
        topic,
        scope,
        content: SignalContent::HumanInput(HumanInput {
            text: decision.justification.clone(),
            human: decision.human.clone(),
            role: decision.role,
            action: Some(decision.action),
        }),
    };
    let bound = bind_rules(rules, registry.policy());
    for p in detect(&signal, &bound) {
        out.extend(admit(registry, &p, &[(rid, p.attenuation)])?);
    }
    Ok(out)
}
