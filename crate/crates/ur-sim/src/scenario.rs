//! Scenario files.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use ur_core::lifecycle::{HumanAction, HumanRole, LifecycleState};
use ur_core::mechanisms::{ActionTemplate, DetectorRule, ReasoningTrace};
use ur_core::model::{ActorId, Leaf};
use ur_core::policy::{load_policy, Policy};

use crate::{noise, SimError};

pub const SCENARIO_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    /// Raw channel message (or array of messages) for the Observer.
    InjectSignal,
    /// Reasoning traces from mock agents.
    AgentOutput,
    /// A decision on the open escalation for a topic. Skipped in interactive mode.
    HumanDecisionScript,
    InfrastructureChange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptItem {
    pub at: u64,
    pub kind: ItemKind,
    pub payload: Value,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentOutput {
    pub agent: ActorId,
    #[serde(default)]
    pub topic: Option<String>,
    #[serde(default)]
    pub scope: Vec<String>,
    pub traces: Vec<ReasoningTrace>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfrastructureItem {
    pub agent: ActorId,
    pub component: String,
    pub change: String,
    #[serde(default)]
    pub topic: Option<String>,
    #[serde(default)]
    pub scope: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedDecision {
    /// Topic of the escalated record.
    pub topic: String,
    #[serde(default)]
    pub leaf: Option<Leaf>,
    pub human: ActorId,
    pub role: HumanRole,
    pub action: HumanAction,
    pub justification: String,
    #[serde(default)]
    pub authorized_actions: Vec<ActionTemplate>,
}

/// A golden-trace line: at tick `at` a record of `leaf` entered `state`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceAssertion {
    pub at: u64,
    pub leaf: Leaf,
    pub state: LifecycleState,
    /// Record confidence right after the transition, to within 1e-9.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor: Option<String>,
}

/// Either a path to a separate asset file or the asset inline.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum AssetRef {
    Path(String),
    Inline(Value),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    format_version: u32,
    name: String,
    #[serde(default)]
    description: String,
    seed: u64,
    ticks: u64,
    /// Report name to mandatory fields, for the Observer.
    #[serde(default)]
    schemas: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    detector_rules: Option<AssetRef>,
    #[serde(default)]
    policy: Option<AssetRef>,
    script: Vec<ScriptItem>,
    #[serde(default)]
    expected_trace: Option<Vec<TraceAssertion>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleSetFile {
    format_version: u32,
    #[serde(default)]
    #[allow(dead_code)]
    name: String,
    rules: Vec<DetectorRule>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub seed: u64,
    pub ticks: u64,
    pub schemas: BTreeMap<String, Vec<String>>,
    pub detector_rules: Vec<DetectorRule>,
    pub policy: Option<Policy>,
    pub script: Vec<ScriptItem>,
    pub expected_trace: Option<Vec<TraceAssertion>>,
}

fn invalid(msg: impl Into<String>) -> SimError {
    SimError::ScenarioInvalid(msg.into())
}

pub fn parse_rule_set(text: &str) -> Result<Vec<DetectorRule>, SimError> {
    let file: RuleSetFile =
        serde_json::from_str(text).map_err(|e| invalid(format!("rule set: {e}")))?;
    if file.format_version != SCENARIO_FORMAT_VERSION {
        return Err(invalid(format!(
            "rule set format_version {} unsupported",
            file.format_version
        )));
    }
    Ok(file.rules)
}

impl Scenario {
    /// Parses a scenario document. `resolve` loads referenced asset files by
    /// the path written in the document.
    pub fn parse(
        text: &str,
        resolve: &dyn Fn(&str) -> Result<String, SimError>,
    ) -> Result<Scenario, SimError> {
        let file: ScenarioFile =
            serde_json::from_str(text).map_err(|e| invalid(format!("scenario: {e}")))?;
        if file.format_version != SCENARIO_FORMAT_VERSION {
            return Err(invalid(format!(
                "scenario format_version {} unsupported",
                file.format_version
            )));
        }
        let detector_rules = match file.detector_rules {
            None => Vec::new(),
            Some(AssetRef::Path(p)) => parse_rule_set(&resolve(&p)?)?,
            Some(AssetRef::Inline(v)) => parse_rule_set(&v.to_string())?,
        };
        let policy = match file.policy {
            None => None,
            Some(AssetRef::Path(p)) => Some(resolve(&p).and_then(|t| policy_from(&t))?),
            Some(AssetRef::Inline(v)) => Some(policy_from(&v.to_string())?),
        };
        let scenario = Scenario {
            name: file.name,
            description: file.description,
            seed: file.seed,
            ticks: file.ticks,
            schemas: file.schemas,
            detector_rules,
            policy,
            script: file.script,
            expected_trace: file.expected_trace,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let mut problems = Vec::new();
        if self.name.trim().is_empty() {
            problems.push("empty scenario name".to_string());
        }
        if self.script.windows(2).any(|w| w[0].at > w[1].at) {
            problems.push("script is not sorted by tick".into());
        }
        for (i, item) in self.script.iter().enumerate() {
            if item.at == 0 || item.at > self.ticks {
                problems.push(format!("item {i} at tick {} outside 1..={}", item.at, self.ticks));
            }
            if let Err(e) = check_item(item) {
                problems.push(format!("item {i}: {e}"));
            }
        }
        for rule in &self.detector_rules {
            problems.extend(rule.violations());
        }
        for (i, a) in self.expected_trace.iter().flatten().enumerate() {
            if a.at > self.ticks {
                problems.push(format!("expected_trace[{i}] at tick {} beyond {}", a.at, self.ticks));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(invalid(problems.join("; ")))
        }
    }
}

fn policy_from(text: &str) -> Result<Policy, SimError> {
    load_policy(text).map_err(|e| invalid(format!("policy: {e}")))
}

fn check_item(item: &ScriptItem) -> Result<(), String> {
    noise::validate(&item.payload).map_err(|e| e.to_string())?;
    if noise::has_noise(&item.payload) && item.kind != ItemKind::InjectSignal {
        return Err("noise placeholders are only allowed in injected signals".into());
    }
    let shape = |r: Result<(), serde_json::Error>| r.map_err(|e| e.to_string());
    match item.kind {
        ItemKind::InjectSignal => {
            let ok = |v: &Value| v.get("channel").is_some() && v.get("agent").is_some();
            let fine = match &item.payload {
                Value::Array(xs) => !xs.is_empty() && xs.iter().all(ok),
                v => ok(v),
            };
            if fine {
                Ok(())
            } else {
                Err("signals need `channel` and `agent`".into())
            }
        }
        ItemKind::AgentOutput => {
            shape(serde_json::from_value::<AgentOutput>(item.payload.clone()).map(|_| ()))
        }
        ItemKind::HumanDecisionScript => {
            let d: ScriptedDecision =
                serde_json::from_value(item.payload.clone()).map_err(|e| e.to_string())?;
            if d.justification.trim().is_empty() {
                return Err("scripted decision without justification".into());
            }
            Ok(())
        }
        ItemKind::InfrastructureChange => shape(
            serde_json::from_value::<InfrastructureItem>(item.payload.clone()).map(|_| ()),
        ),
    }
}
