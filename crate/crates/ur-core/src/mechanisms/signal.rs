use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::lifecycle::{HumanAction, HumanRole, Reassessment};
use crate::model::{ActorId, Polarity, Tick};

/// The system layer a detector watches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    Data,
    Reasoning,
    Interaction,
    Operational,
}

impl Layer {
    pub const ALL: [Layer; 4] = [
        Layer::Data,
        Layer::Reasoning,
        Layer::Interaction,
        Layer::Operational,
    ];
}

/// A normalized, timestamped observation produced by the Observer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    pub timestamp: Tick,
    pub layer: Layer,
    pub source_agent: ActorId,
    pub topic: String,
    pub scope: BTreeSet<String>,
    pub content: SignalContent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SignalContent {
    Measurement(Measurement),
    Reasoning(ReasoningTraces),
    Message(Message),
    HumanInput(HumanInput),
    Operational(OperationalMetrics),
    InfrastructureChange(InfrastructureChange),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub report: String,
    pub values: BTreeMap<String, f64>,
    pub series: BTreeMap<String, Vec<f64>>,
    /// Values for the same fields reported by an independent source.
    pub cross_check: BTreeMap<String, f64>,
    /// Mandatory fields absent from the report.
    pub missing: Vec<String>,
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningTraces {
    pub traces: Vec<ReasoningTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningTrace {
    pub agent: ActorId,
    pub conclusion: String,
    /// Confidence the agent states for its conclusion.
    pub confidence: f64,
    #[serde(default)]
    pub evidence_links: Vec<String>,
    #[serde(default)]
    pub tools_invoked: Vec<String>,
    #[serde(default)]
    pub context: BTreeMap<String, String>,
    /// How the trace bears on existing records about the same topic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stance: Option<Polarity>,
    #[serde(default = "unit_weight")]
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reassessment: Option<Reassessment>,
    /// Fused confidence of the agent's own standing record on the topic,
    /// attached by the Reasoner before detection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_confidence: Option<f64>,
}

fn unit_weight() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub text: String,
    #[serde(default = "default_true")]
    pub schema_valid: bool,
    #[serde(default = "one")]
    pub concurrent_writers: u32,
    /// Exchange round within a conversation between the same agents.
    #[serde(default)]
    pub round: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanInput {
    pub text: String,
    pub human: ActorId,
    pub role: HumanRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<HumanAction>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationalMetrics {
    #[serde(default)]
    pub overrides: u32,
    #[serde(default)]
    pub decisions: u32,
    #[serde(default)]
    pub escalations: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfrastructureChange {
    pub component: String,
    pub change: String,
}

impl Signal {
    /// Free text carried by interaction-layer content.
    pub fn text(&self) -> Option<&str> {
        match &self.content {
            SignalContent::Message(m) => Some(&m.text),
            SignalContent::HumanInput(h) => Some(&h.text),
            _ => None,
        }
    }

    pub fn traces(&self) -> &[ReasoningTrace] {
        match &self.content {
            SignalContent::Reasoning(r) => &r.traces,
            _ => &[],
        }
    }
}
