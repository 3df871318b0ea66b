use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::risk::check_unit;
use super::{
    compute_risk, ActorId, EventId, EvidenceItem, Family, ModelError, RecordId, RiskAssessment,
    Tick, UncertaintyKind,
};
use crate::lifecycle::LifecycleState;

/// Confidence assigned when no prior is supplied.
pub const DEFAULT_CONFIDENCE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub created_by: ActorId,
    pub created_at: Tick,
    pub valid_from: Tick,
    /// Input, reasoning artifact, decision, or action the record is attached to.
    pub source_artifact: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Irreducibility {
    InPrinciple,
    Operational,
    Strategic,
}

impl Irreducibility {
    /// The irreducibility class implied by an ontological family.
    pub fn for_family(family: Family) -> Option<Irreducibility> {
        match family {
            Family::Aleatory => Some(Irreducibility::InPrinciple),
            Family::ArchitecturalMorphing => Some(Irreducibility::Operational),
            Family::Interaction => Some(Irreducibility::Strategic),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OntologicalContext {
    pub indeterminacy_source: String,
    pub irreducibility: Irreducibility,
}

impl OntologicalContext {
    pub fn for_kind(kind: UncertaintyKind, indeterminacy_source: impl Into<String>) -> Option<Self> {
        Irreducibility::for_family(kind.family()).map(|irreducibility| OntologicalContext {
            indeterminacy_source: indeterminacy_source.into(),
            irreducibility,
        })
    }
}

/// Everything needed to open a new record. The registry assigns the id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordDraft {
    pub kind: UncertaintyKind,
    #[serde(default)]
    pub scope: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ontological_ctx: Option<OntologicalContext>,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    pub severity: f64,
    pub likelihood: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expiry: Option<Tick>,
    pub belief_statement: String,
    pub belief_agent: ActorId,
    pub topic: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub annotations: BTreeMap<String, String>,
}

/// The time-indexed uncertainty tuple with its lifecycle position.
///
/// Fields are read-only outside the crate; the lifecycle engine and the
/// registry are the only writers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyRecord {
    pub(crate) id: RecordId,
    pub(crate) kind: UncertaintyKind,
    pub(crate) scope: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub(crate) ontological_ctx: Option<OntologicalContext>,
    pub(crate) provenance: Provenance,
    pub(crate) evidence: Vec<EvidenceItem>,
    pub(crate) confidence: f64,
    pub(crate) risk: RiskAssessment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub(crate) expiry: Option<Tick>,
    pub(crate) upstream: BTreeSet<RecordId>,
    pub(crate) downstream: BTreeSet<RecordId>,
    pub(crate) state: LifecycleState,
    pub(crate) belief_statement: String,
    pub(crate) belief_agent: ActorId,
    pub(crate) topic: String,
    /// Free-form measurable-element annotations such as accuracy or precision.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub(crate) annotations: BTreeMap<String, String>,
    /// Set when the record expired with uncertainty still present.
    pub(crate) residual: bool,
    /// Number of Escalated -> Mitigated returns.
    pub(crate) oscillations: u32,
    /// Event that opened the most recent escalation episode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub(crate) escalation: Option<EventId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub(crate) claimed_by: Option<ActorId>,
    /// Orchestration rules already acted on in the current state.
    pub(crate) applied_rules: BTreeSet<String>,
    pub(crate) state_since: Tick,
}

impl UncertaintyRecord {
    pub(crate) fn from_draft(id: RecordId, draft: RecordDraft) -> Result<Self, ModelError> {
        let confidence = check_unit("confidence", draft.confidence.unwrap_or(DEFAULT_CONFIDENCE))?;
        let risk = compute_risk(draft.severity, draft.likelihood)?;
        let record = UncertaintyRecord {
            id,
            kind: draft.kind,
            scope: draft.scope,
            ontological_ctx: draft.ontological_ctx,
            state_since: draft.provenance.created_at,
            provenance: draft.provenance,
            evidence: Vec::new(),
            confidence,
            risk,
            expiry: draft.expiry,
            upstream: BTreeSet::new(),
            downstream: BTreeSet::new(),
            state: LifecycleState::Detected,
            belief_statement: draft.belief_statement,
            belief_agent: draft.belief_agent,
            topic: draft.topic,
            annotations: draft.annotations,
            residual: false,
            oscillations: 0,
            escalation: None,
            claimed_by: None,
            applied_rules: BTreeSet::new(),
        };
        record.validate()?;
        Ok(record)
    }

    /// Checks every structural invariant of the record.
    pub fn validate(&self) -> Result<(), ModelError> {
        check_unit("confidence", self.confidence)?;
        self.risk.validate()?;
        if self.upstream.contains(&self.id) || self.downstream.contains(&self.id) {
            return Err(ModelError::InvalidRecord(format!(
                "{} lists itself as a dependency",
                self.id
            )));
        }
        if let Some(shared) = self.upstream.intersection(&self.downstream).next() {
            return Err(ModelError::InvalidRecord(format!(
                "{} has {} both upstream and downstream",
                self.id, shared
            )));
        }
        if let Some(ctx) = &self.ontological_ctx {
            if !self.kind.is_ontological() {
                return Err(ModelError::InvalidRecord(format!(
                    "{}: ontological context on {} record",
                    self.id,
                    self.kind
                )));
            }
            if Irreducibility::for_family(self.kind.family()) != Some(ctx.irreducibility) {
                return Err(ModelError::InvalidRecord(format!(
                    "{}: irreducibility {:?} does not match family {:?}",
                    self.id,
                    ctx.irreducibility,
                    self.kind.family()
                )));
            }
        }
        for pair in self.evidence.windows(2) {
            if pair[1].timestamp < pair[0].timestamp {
                return Err(ModelError::InvalidRecord(format!(
                    "{}: evidence timestamps decrease at {}",
                    self.id, pair[1].id
                )));
            }
        }
        for item in &self.evidence {
            item.validate()?;
        }
        Ok(())
    }

    /// Characterization warnings that do not invalidate the record.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.scope.is_empty() {
            out.push(format!("{} has an empty scope", self.id));
        }
        out
    }

    pub fn id(&self) -> RecordId {
        self.id
    }
    pub fn kind(&self) -> UncertaintyKind {
        self.kind
    }
    pub fn scope(&self) -> &BTreeSet<String> {
        &self.scope
    }
    pub fn ontological_ctx(&self) -> Option<&OntologicalContext> {
        self.ontological_ctx.as_ref()
    }
    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }
    pub fn evidence(&self) -> &[EvidenceItem] {
        &self.evidence
    }
    pub fn confidence(&self) -> f64 {
        self.confidence
    }
    pub fn risk(&self) -> RiskAssessment {
        self.risk
    }
    pub fn expiry(&self) -> Option<Tick> {
        self.expiry
    }
    pub fn upstream(&self) -> &BTreeSet<RecordId> {
        &self.upstream
    }
    pub fn downstream(&self) -> &BTreeSet<RecordId> {
        &self.downstream
    }
    pub fn state(&self) -> LifecycleState {
        self.state
    }
    pub fn belief_statement(&self) -> &str {
        &self.belief_statement
    }
    pub fn belief_agent(&self) -> &ActorId {
        &self.belief_agent
    }
    pub fn topic(&self) -> &str {
        &self.topic
    }
    pub fn annotations(&self) -> &BTreeMap<String, String> {
        &self.annotations
    }
    pub fn residual(&self) -> bool {
        self.residual
    }
    pub fn oscillations(&self) -> u32 {
        self.oscillations
    }
    pub fn escalation(&self) -> Option<EventId> {
        self.escalation
    }
    pub fn claimed_by(&self) -> Option<&ActorId> {
        self.claimed_by.as_ref()
    }
    pub fn applied_rules(&self) -> &BTreeSet<String> {
        &self.applied_rules
    }
    pub fn state_since(&self) -> Tick {
        self.state_since
    }
    pub fn is_terminal(&self) -> bool {
        self.state.is_terminal()
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::model::Leaf;

    pub(crate) fn draft(leaf: Leaf) -> RecordDraft {
        let kind = UncertaintyKind::from_leaf(leaf);
        RecordDraft {
            kind,
            scope: ["echo-17".to_string()].into(),
            ontological_ctx: OntologicalContext::for_kind(kind, "test"),
            provenance: Provenance {
                created_by: "observer".into(),
                created_at: Tick(1),
                valid_from: Tick(1),
                source_artifact: "echo-17".into(),
            },
            confidence: None,
            severity: 0.5,
            likelihood: 0.5,
            expiry: None,
            belief_statement: "statement".into(),
            belief_agent: "agent".into(),
            topic: "topic".into(),
            annotations: BTreeMap::new(),
        }
    }

    #[test]
    fn default_confidence_is_half() {
        let r = UncertaintyRecord::from_draft(RecordId(1), draft(Leaf::Missing)).unwrap();
        assert_eq!(r.confidence(), 0.5);
        assert_eq!(r.state(), LifecycleState::Detected);
        assert!(r.warnings().is_empty());
    }

    #[test]
    fn ontological_context_requires_ontological_kind() {
        let mut d = draft(Leaf::Missing);
        d.ontological_ctx = Some(OntologicalContext {
            indeterminacy_source: "x".into(),
            irreducibility: Irreducibility::InPrinciple,
        });
        assert!(UncertaintyRecord::from_draft(RecordId(1), d).is_err());
    }

    #[test]
    fn irreducibility_must_match_family() {
        let mut d = draft(Leaf::ArchitecturalMorphing);
        d.ontological_ctx = Some(OntologicalContext {
            indeterminacy_source: "x".into(),
            irreducibility: Irreducibility::Strategic,
        });
        assert!(UncertaintyRecord::from_draft(RecordId(1), d).is_err());
        let ok = draft(Leaf::ArchitecturalMorphing);
        let r = UncertaintyRecord::from_draft(RecordId(1), ok).unwrap();
        assert_eq!(
            r.ontological_ctx().unwrap().irreducibility,
            Irreducibility::Operational
        );
    }

    #[test]
    fn empty_scope_is_a_warning_not_an_error() {
        let mut d = draft(Leaf::Noise);
        d.scope.clear();
        let r = UncertaintyRecord::from_draft(RecordId(4), d).unwrap();
        assert_eq!(r.warnings().len(), 1);
    }

    #[test]
    fn confidence_out_of_range() {
        let mut d = draft(Leaf::Noise);
        d.confidence = Some(1.5);
        assert!(UncertaintyRecord::from_draft(RecordId(1), d).is_err());
    }
}
