use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::lifecycle::LifecycleState;
use crate::model::{
    ActorId, Category, EvidenceSource, Family, Polarity, RecordId, UncertaintyRecord,
};
use crate::policy::{should_engage_human, Policy};
use crate::registry::RegistrySnapshot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    AcquireData,
    MultiAgentDeliberation,
    RequireVerification,
    RequestClarification,
    AdjustAutonomy,
    RestructureWorkflow,
    DeferAction,
    DecomposeAction,
    ConstrainInference,
    LimitConcurrency,
    Escalate,
    NotifyHuman,
}

impl ActionKind {
    pub const ALL: [ActionKind; 12] = [
        ActionKind::AcquireData,
        ActionKind::MultiAgentDeliberation,
        ActionKind::RequireVerification,
        ActionKind::RequestClarification,
        ActionKind::AdjustAutonomy,
        ActionKind::RestructureWorkflow,
        ActionKind::DeferAction,
        ActionKind::DecomposeAction,
        ActionKind::ConstrainInference,
        ActionKind::LimitConcurrency,
        ActionKind::Escalate,
        ActionKind::NotifyHuman,
    ];

    /// Hand-off kinds every policy must allow.
    pub fn is_handoff(self) -> bool {
        matches!(self, ActionKind::Escalate | ActionKind::NotifyHuman)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Authorization {
    /// An orchestration rule id, or `hitl:<trigger>` for engagement triggers.
    Rule(String),
    Human(ActorId),
}

impl Authorization {
    pub fn rule_id(&self) -> Option<&str> {
        match self {
            Authorization::Rule(id) => Some(id),
            Authorization::Human(_) => None,
        }
    }

    pub fn actor(&self) -> ActorId {
        match self {
            Authorization::Rule(id) => ActorId::new(format!("rule:{id}")),
            Authorization::Human(h) => h.clone(),
        }
    }
}

impl fmt::Display for Authorization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Authorization::Rule(id) => write!(f, "rule:{id}"),
            Authorization::Human(h) => write!(f, "human:{h}"),
        }
    }
}

/// An instance of `H(u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandlingAction {
    pub id: String,
    pub target: RecordId,
    pub kind: ActionKind,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub parameters: BTreeMap<String, Value>,
    pub authorized_by: Authorization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionTemplate {
    pub kind: ActionKind,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub parameters: BTreeMap<String, Value>,
}

impl ActionTemplate {
    pub fn new(kind: ActionKind) -> Self {
        ActionTemplate {
            kind,
            parameters: BTreeMap::new(),
        }
    }
}

/// Conjunction of conditions; empty lists and unset fields match everything.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuleGuard {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub states: Vec<LifecycleState>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub families: Vec<Family>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub category: Option<Category>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_risk: Option<f64>,
    /// risk > theta_esc.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub risk_above_escalation: bool,
    /// Both supporting and conflicting agent-reasoning evidence on file.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub agent_disagreement: bool,
}

impl RuleGuard {
    pub fn holds(&self, record: &UncertaintyRecord, policy: &Policy) -> bool {
        (self.states.is_empty() || self.states.contains(&record.state()))
            && (self.families.is_empty() || self.families.contains(&record.kind().family()))
            && self.category.is_none_or(|c| c == record.kind().category())
            && self.min_risk.is_none_or(|m| record.risk().risk >= m)
            && (!self.risk_above_escalation || record.risk().risk > policy.thresholds.theta_esc)
            && (!self.agent_disagreement || agents_disagree(record))
    }
}

pub fn agents_disagree(record: &UncertaintyRecord) -> bool {
    let reasoning = |p: Polarity| {
        record
            .evidence()
            .iter()
            .any(|e| e.source == EvidenceSource::AgentReasoning && e.polarity == p)
    };
    reasoning(Polarity::Supporting) && reasoning(Polarity::Conflicting)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrchestrationRule {
    pub id: String,
    /// Lower runs first.
    pub priority: i32,
    #[serde(default)]
    pub guard: RuleGuard,
    pub actions: Vec<ActionTemplate>,
}

const HITL_PREFIX: &str = "hitl:";

pub fn hitl_rule_id(trigger: &str) -> String {
    format!("{HITL_PREFIX}{trigger}")
}

pub fn hitl_trigger_name(rule_id: &str) -> Option<&str> {
    rule_id.strip_prefix(HITL_PREFIX)
}

fn handoff(record: &UncertaintyRecord) -> Vec<ActionKind> {
    if record.state() == LifecycleState::Mitigated {
        vec![ActionKind::Escalate, ActionKind::NotifyHuman]
    } else {
        vec![ActionKind::NotifyHuman]
    }
}

/// The Orchestrator. Pure: actions are ordered by record id, then by rule
/// priority and declaration order. Rules already acted on in a record's
/// current state are skipped, as are terminal records.
pub fn orchestrate(snapshot: &RegistrySnapshot, policy: &Policy) -> Vec<HandlingAction> {
    let mut rules: Vec<(usize, &OrchestrationRule)> =
        policy.orchestration_rules.iter().enumerate().collect();
    rules.sort_by_key(|(i, r)| (r.priority, *i));

    let mut out = Vec::new();
    for record in snapshot.records.values().filter(|r| !r.is_terminal()) {
        let mut push = |rule: &str, n: usize, kind: ActionKind, parameters: BTreeMap<String, Value>| {
            out.push(HandlingAction {
                id: format!("{rule}/{}/{}/{n}", record.id(), record.state_since().get()),
                target: record.id(),
                kind,
                parameters,
                authorized_by: Authorization::Rule(rule.to_string()),
            });
        };

        if record.state() != LifecycleState::Escalated {
            if let Some(trigger) = should_engage_human(record, snapshot, policy) {
                let rule = hitl_rule_id(trigger);
                if !record.applied_rules().contains(&rule) {
                    for (n, kind) in handoff(record).into_iter().enumerate() {
                        let params = BTreeMap::from([("trigger".to_string(), Value::from(trigger))]);
                        push(&rule, n, kind, params);
                    }
                }
            }
        }

        for (_, rule) in &rules {
            if record.applied_rules().contains(&rule.id) || !rule.guard.holds(record, policy) {
                continue;
            }
            let mut n = 0;
            for template in &rule.actions {
                if policy.autonomy_scope.contains(&template.kind) {
                    push(&rule.id, n, template.kind, template.parameters.clone());
                    n += 1;
                } else {
                    for kind in handoff(record) {
                        let params = BTreeMap::from([(
                            "replaces".to_string(),
                            serde_json::to_value(template.kind).expect("kind serializes"),
                        )]);
                        push(&rule.id, n, kind, params);
                        n += 1;
                    }
                }
            }
        }
    }
    out
}
