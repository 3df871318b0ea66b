//! Declarative governance configuration and pure evaluation over it.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::mechanisms::{
    ActionKind, ActionTemplate, DetectorRule, OrchestrationRule, RuleGuard,
    DEFAULT_CALIBRATION_DELTA,
};
use crate::lifecycle::LifecycleState;
use crate::model::{Family, Leaf, UncertaintyRecord};
use crate::registry::RegistrySnapshot;

pub const POLICY_FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("policy schema error: {0}")]
    Schema(String),
    #[error("policy violates constraints: {}", .0.join("; "))]
    Constraint(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// Severity at or below which a mitigated record may resolve.
    pub theta_sev: f64,
    /// Risk at or below which a mitigated record may resolve.
    pub theta_risk: f64,
    /// Risk above which a mitigated record escalates.
    pub theta_esc: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            theta_sev: 0.1,
            theta_risk: 0.1,
            theta_esc: 0.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TriggerCondition {
    /// Escalated -> Mitigated returns reached `min_oscillations`.
    PersistentDisagreement { min_oscillations: u32 },
    /// A missing-data record with severity >= `min_severity` still open past
    /// half of its validity window.
    UnresolvedHighSeverityGap { min_severity: f64 },
    /// Record scope touches a decision class that cannot be undone.
    IrreversibleDecisionClass { scopes: BTreeSet<String> },
    RiskAbove { min_risk: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HitlTrigger {
    pub name: String,
    pub condition: TriggerCondition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Policy {
    pub version: String,
    pub thresholds: Thresholds,
    /// Action kinds the framework may execute without a human.
    pub autonomy_scope: BTreeSet<ActionKind>,
    /// Evaluated in declaration order; the first match wins.
    pub hitl_triggers: Vec<HitlTrigger>,
    pub calibration_delta: f64,
    pub orchestration_rules: Vec<OrchestrationRule>,
    pub detector_rules: Vec<DetectorRule>,
    /// Attenuation for detector-created links when a rule sets none.
    pub default_attenuation: f64,
}

fn mitigation(id: &str, family: Family, kind: ActionKind) -> OrchestrationRule {
    OrchestrationRule {
        id: id.into(),
        priority: 10,
        guard: RuleGuard {
            states: vec![LifecycleState::Characterized],
            families: vec![family],
            ..RuleGuard::default()
        },
        actions: vec![ActionTemplate::new(kind)],
    }
}

impl Default for Policy {
    fn default() -> Self {
        use ActionKind::*;
        Policy {
            version: "default-1".into(),
            thresholds: Thresholds::default(),
            autonomy_scope: ActionKind::ALL
                .into_iter()
                .filter(|k| *k != RestructureWorkflow)
                .collect(),
            hitl_triggers: vec![
                HitlTrigger {
                    name: "persistent-disagreement".into(),
                    condition: TriggerCondition::PersistentDisagreement { min_oscillations: 3 },
                },
                HitlTrigger {
                    name: "unresolved-high-severity-gap".into(),
                    condition: TriggerCondition::UnresolvedHighSeverityGap { min_severity: 0.8 },
                },
                HitlTrigger {
                    name: "irreversible-decision-class".into(),
                    condition: TriggerCondition::IrreversibleDecisionClass {
                        scopes: ["treatment-decision".to_string()].into(),
                    },
                },
            ],
            calibration_delta: DEFAULT_CALIBRATION_DELTA,
            orchestration_rules: vec![
                OrchestrationRule {
                    id: "escalate-high-risk".into(),
                    priority: 1,
                    guard: RuleGuard {
                        states: vec![LifecycleState::Mitigated],
                        risk_above_escalation: true,
                        ..RuleGuard::default()
                    },
                    actions: vec![ActionTemplate::new(Escalate), ActionTemplate::new(NotifyHuman)],
                },
                OrchestrationRule {
                    id: "notify-on-escalation".into(),
                    priority: 1,
                    guard: RuleGuard {
                        states: vec![LifecycleState::Escalated],
                        ..RuleGuard::default()
                    },
                    actions: vec![ActionTemplate::new(NotifyHuman)],
                },
                OrchestrationRule {
                    id: "deliberate-on-disagreement".into(),
                    priority: 5,
                    guard: RuleGuard {
                        states: vec![LifecycleState::Mitigated],
                        agent_disagreement: true,
                        ..RuleGuard::default()
                    },
                    actions: vec![ActionTemplate::new(MultiAgentDeliberation)],
                },
                mitigation("mitigate-model", Family::Model, ConstrainInference),
                mitigation("mitigate-data", Family::Data, AcquireData),
                mitigation("mitigate-inferential", Family::Inferential, RequireVerification),
                mitigation("mitigate-interpretational", Family::Interpretational, RequestClarification),
                mitigation("bound-aleatory", Family::Aleatory, ConstrainInference),
                mitigation("bound-morphing", Family::ArchitecturalMorphing, AdjustAutonomy),
                mitigation("bound-interaction", Family::Interaction, LimitConcurrency),
            ],
            detector_rules: Vec::new(),
            default_attenuation: 1.0,
        }
    }
}

impl Policy {
    /// Every constraint violation, empty when the policy is valid.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let th = &self.thresholds;
        for (name, v) in [
            ("theta_sev", th.theta_sev),
            ("theta_risk", th.theta_risk),
            ("theta_esc", th.theta_esc),
            ("calibration_delta", self.calibration_delta),
            ("default_attenuation", self.default_attenuation),
        ] {
            if !(0.0..=1.0).contains(&v) {
                out.push(format!("{name} = {v} outside [0, 1]"));
            }
        }
        if th.theta_risk > th.theta_esc {
            out.push(format!(
                "theta_risk {} exceeds theta_esc {}",
                th.theta_risk, th.theta_esc
            ));
        }
        for kind in [ActionKind::Escalate, ActionKind::NotifyHuman] {
            if !self.autonomy_scope.contains(&kind) {
                out.push(format!("autonomy_scope must contain {kind:?}"));
            }
        }
        if self.version.trim().is_empty() {
            out.push("version is empty".into());
        }
        let mut names = HashSet::new();
        for t in &self.hitl_triggers {
            if t.name.trim().is_empty() || !names.insert(t.name.as_str()) {
                out.push(format!("hitl trigger name {:?} empty or repeated", t.name));
            }
            match &t.condition {
                TriggerCondition::UnresolvedHighSeverityGap { min_severity: v }
                | TriggerCondition::RiskAbove { min_risk: v }
                    if !(0.0..=1.0).contains(v) =>
                {
                    out.push(format!("hitl trigger {}: threshold {v} outside [0, 1]", t.name));
                }
                _ => {}
            }
        }
        let mut ids = HashSet::new();
        for r in &self.orchestration_rules {
            if r.id.trim().is_empty() || !ids.insert(r.id.as_str()) {
                out.push(format!("orchestration rule id {:?} empty or repeated", r.id));
            }
            if r.id.starts_with("hitl:") {
                out.push(format!("orchestration rule id {:?} uses the reserved hitl: prefix", r.id));
            }
            if r.actions.is_empty() {
                out.push(format!("orchestration rule {} has no actions", r.id));
            }
        }
        let mut ids = HashSet::new();
        for r in &self.detector_rules {
            if !ids.insert(r.id.as_str()) {
                out.push(format!("detector rule id {:?} repeated", r.id));
            }
            out.extend(r.violations());
        }
        out
    }

    pub fn trigger(&self, name: &str) -> Option<&HitlTrigger> {
        self.hitl_triggers.iter().find(|t| t.name == name)
    }

    pub fn rule(&self, id: &str) -> Option<&OrchestrationRule> {
        self.orchestration_rules.iter().find(|r| r.id == id)
    }

    /// The policy as a versioned file document.
    pub fn to_document(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("policy serializes");
        v["format_version"] = Value::from(POLICY_FORMAT_VERSION);
        v
    }
}

/// Parses and validates a policy file. Absent fields take their defaults.
pub fn load_policy(document: &str) -> Result<Policy, PolicyError> {
    let mut value: Value =
        serde_json::from_str(document).map_err(|e| PolicyError::Schema(e.to_string()))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| PolicyError::Schema("policy document must be a JSON object".into()))?;
    match obj.remove("format_version").and_then(|v| v.as_u64()) {
        Some(POLICY_FORMAT_VERSION) => {}
        other => {
            return Err(PolicyError::Schema(format!(
                "format_version must be {POLICY_FORMAT_VERSION}, got {other:?}"
            )))
        }
    }
    let policy: Policy =
        serde_json::from_value(value).map_err(|e| PolicyError::Schema(e.to_string()))?;
    let violations = policy.violations();
    if violations.is_empty() {
        Ok(policy)
    } else {
        Err(PolicyError::Constraint(violations))
    }
}

fn matches(
    condition: &TriggerCondition,
    record: &UncertaintyRecord,
    snapshot: &RegistrySnapshot,
) -> bool {
    match condition {
        TriggerCondition::PersistentDisagreement { min_oscillations } => {
            record.oscillations() >= *min_oscillations
        }
        TriggerCondition::UnresolvedHighSeverityGap { min_severity } => {
            let Some(tau) = record.expiry() else {
                return false;
            };
            let created = record.provenance().created_at;
            record.kind().leaf() == Leaf::Missing
                && record.risk().severity >= *min_severity
                && 2 * snapshot.now.saturating_sub(created) >= tau.saturating_sub(created)
        }
        TriggerCondition::IrreversibleDecisionClass { scopes } => {
            !record.scope().is_disjoint(scopes)
        }
        TriggerCondition::RiskAbove { min_risk } => record.risk().risk > *min_risk,
    }
}

/// First trigger, in declaration order, calling for a human on a live record.
pub fn should_engage_human<'p>(
    record: &UncertaintyRecord,
    snapshot: &RegistrySnapshot,
    policy: &'p Policy,
) -> Option<&'p str> {
    if record.is_terminal() {
        return None;
    }
    policy
        .hitl_triggers
        .iter()
        .find(|t| matches(&t.condition, record, snapshot))
        .map(|t| t.name.as_str())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_document() {
        let p = load_policy(r#"{"format_version": 1}"#).unwrap();
        assert_eq!(p.thresholds.theta_sev, 0.1);
        assert_eq!(p.thresholds.theta_risk, 0.1);
        assert_eq!(p.thresholds.theta_esc, 0.6);
        assert_eq!(p, Policy::default());
    }

    #[test]
    fn threshold_ordering_violation() {
        let doc = r#"{"format_version": 1,
            "thresholds": {"theta_sev": 0.1, "theta_risk": 0.7, "theta_esc": 0.5}}"#;
        match load_policy(doc) {
            Err(PolicyError::Constraint(v)) => assert_eq!(v.len(), 1, "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn every_violation_is_listed() {
        let doc = r#"{"format_version": 1,
            "thresholds": {"theta_sev": 1.5, "theta_risk": 0.7, "theta_esc": 0.5},
            "autonomy_scope": ["acquire_data"]}"#;
        match load_policy(doc) {
            Err(PolicyError::Constraint(v)) => assert_eq!(v.len(), 4, "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn scope_must_allow_handoff() {
        for kind in ActionKind::ALL {
            let mut p = Policy::default();
            p.autonomy_scope.remove(&kind);
            assert_eq!(p.violations().is_empty(), !kind.is_handoff(), "{kind:?}");
        }
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(load_policy("not json"), Err(PolicyError::Schema(_))));
        assert!(matches!(load_policy("{}"), Err(PolicyError::Schema(_))));
        assert!(matches!(
            load_policy(r#"{"format_version": 1, "thresholds": 3}"#),
            Err(PolicyError::Schema(_))
        ));
        assert!(matches!(
            load_policy(r#"{"format_version": 1, "surprise": true}"#),
            Err(PolicyError::Schema(_))
        ));
    }

    #[test]
    fn document_round_trip() {
        let p = Policy::default();
        let text = serde_json::to_string(&p.to_document()).unwrap();
        assert_eq!(load_policy(&text).unwrap(), p);
    }
}
