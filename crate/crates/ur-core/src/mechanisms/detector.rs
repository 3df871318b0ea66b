//! Threshold detector rules. Rules are configuration, not code.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::signal::{Layer, ReasoningTrace, Signal, SignalContent};
use crate::model::{ActorId, Tick, UncertaintyKind, DEFAULT_CONFIDENCE};
use crate::policy::Policy;

/// Calibration gap used when neither the rule nor the policy sets one.
pub const DEFAULT_CALIBRATION_DELTA: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum Predicate {
    /// Any mandatory field missing, or any of `fields` when non-empty.
    MissingFields {
        #[serde(default)]
        fields: Vec<String>,
    },
    OutOfRange {
        field: String,
        min: f64,
        max: f64,
    },
    /// `|mean(series) - baseline| > threshold`.
    MeanShift {
        series: String,
        baseline: f64,
        threshold: f64,
    },
    /// Population standard deviation of `series` above `max_std`.
    SampleSpread {
        series: String,
        max_std: f64,
    },
    CrossSourceMismatch {
        tolerance: f64,
    },
    AgentDivergence,
    LowConfidence {
        below: f64,
    },
    UnsupportedConclusion,
    MissingToolInvocation {
        tool: String,
    },
    /// Stated confidence differs from the agent's fused record confidence by more than `delta`.
    CalibrationGap {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<f64>,
    },
    ContextMismatch {
        key: String,
        expected: String,
    },
    AmbiguousTerm {
        terms: Vec<String>,
    },
    SchemaInvalid,
    ConcurrencyConflict,
    FeedbackLoop {
        min_rounds: u32,
    },
    HedgedLanguage {
        markers: Vec<String>,
    },
    OverrideRate {
        max_rate: f64,
    },
    RepeatedEscalations {
        min: u32,
    },
    InfrastructureChange {
        #[serde(default)]
        components: Vec<String>,
    },
}

impl Predicate {
    /// The layer whose signals the predicate inspects.
    pub fn layer(&self) -> Layer {
        use Predicate::*;
        match self {
            MissingFields { .. }
            | OutOfRange { .. }
            | MeanShift { .. }
            | SampleSpread { .. }
            | CrossSourceMismatch { .. } => Layer::Data,
            AgentDivergence
            | LowConfidence { .. }
            | UnsupportedConclusion
            | MissingToolInvocation { .. }
            | CalibrationGap { .. }
            | ContextMismatch { .. } => Layer::Reasoning,
            AmbiguousTerm { .. }
            | SchemaInvalid
            | ConcurrencyConflict
            | FeedbackLoop { .. }
            | HedgedLanguage { .. } => Layer::Interaction,
            OverrideRate { .. } | RepeatedEscalations { .. } | InfrastructureChange { .. } => {
                Layer::Operational
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorRule {
    pub id: String,
    pub layer: Layer,
    pub kind_emitted: UncertaintyKind,
    pub predicate: Predicate,
    /// Falls back to the confidence stated in the signal, then to the default prior.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_confidence: Option<f64>,
    pub initial_severity: f64,
    /// Falls back to `1 - confidence`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_likelihood: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validity_ticks: Option<u64>,
    /// Attenuation for links from records named in the signal's evidence links.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attenuation: Option<f64>,
}

impl DetectorRule {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.id.trim().is_empty() {
            out.push("detector rule with empty id".to_string());
        }
        if self.predicate.layer() != self.layer {
            out.push(format!(
                "detector rule {}: predicate watches {:?}, rule declares {:?}",
                self.id,
                self.predicate.layer(),
                self.layer
            ));
        }
        let unit = [
            ("initial_confidence", self.initial_confidence),
            ("initial_severity", Some(self.initial_severity)),
            ("initial_likelihood", self.initial_likelihood),
            ("attenuation", self.attenuation),
        ];
        for (name, v) in unit {
            if let Some(v) = v {
                if !(0.0..=1.0).contains(&v) {
                    out.push(format!("detector rule {}: {name} {v} outside [0, 1]", self.id));
                }
            }
        }
        if let Predicate::CalibrationGap { delta: Some(d) } = self.predicate {
            if !(0.0..=1.0).contains(&d) {
                out.push(format!("detector rule {}: delta {d} outside [0, 1]", self.id));
            }
        }
        out
    }
}

/// Fills policy-level defaults into rules that leave them open.
pub fn bind_rules(rules: &[DetectorRule], policy: &Policy) -> Vec<DetectorRule> {
    rules
        .iter()
        .cloned()
        .map(|mut r| {
            if let Predicate::CalibrationGap { delta: d @ None } = &mut r.predicate {
                *d = Some(policy.calibration_delta);
            }
            if r.attenuation.is_none() {
                r.attenuation = Some(policy.default_attenuation);
            }
            r
        })
        .collect()
}

/// A detector's suggestion that an uncertainty instance exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub rule_id: String,
    pub kind: UncertaintyKind,
    pub timestamp: Tick,
    pub source_agent: ActorId,
    pub topic: String,
    pub scope: BTreeSet<String>,
    pub belief_statement: String,
    pub belief_agent: ActorId,
    pub confidence: f64,
    pub severity: f64,
    pub likelihood: f64,
    pub expiry: Option<Tick>,
    pub attenuation: f64,
    /// Artifacts the signal cites; records scoped to them become upstream.
    pub evidence_links: BTreeSet<String>,
    pub detail: String,
}

struct Hit {
    detail: String,
    statement: Option<String>,
    agent: Option<ActorId>,
    stated_confidence: Option<f64>,
    links: BTreeSet<String>,
}

impl Hit {
    fn new(detail: String) -> Self {
        Hit {
            detail,
            statement: None,
            agent: None,
            stated_confidence: None,
            links: BTreeSet::new(),
        }
    }

    fn from_trace(detail: String, t: &ReasoningTrace) -> Self {
        Hit {
            detail,
            statement: Some(t.conclusion.clone()),
            agent: Some(t.agent.clone()),
            stated_confidence: Some(t.confidence),
            links: t.evidence_links.iter().cloned().collect(),
        }
    }
}

/// One proposal per matching rule, in rule order.
pub fn detect(signal: &Signal, rules: &[DetectorRule]) -> Vec<Proposal> {
    rules
        .iter()
        .filter(|r| r.layer == signal.layer)
        .filter_map(|r| evaluate(&r.predicate, signal).map(|hit| proposal(r, signal, hit)))
        .collect()
}

fn proposal(rule: &DetectorRule, signal: &Signal, hit: Hit) -> Proposal {
    let confidence = rule
        .initial_confidence
        .or(hit.stated_confidence)
        .unwrap_or(DEFAULT_CONFIDENCE);
    let likelihood = rule.initial_likelihood.unwrap_or(1.0 - confidence);
    Proposal {
        rule_id: rule.id.clone(),
        kind: rule.kind_emitted,
        timestamp: signal.timestamp,
        source_agent: signal.source_agent.clone(),
        topic: signal.topic.clone(),
        scope: signal.scope.clone(),
        belief_statement: hit.statement.unwrap_or_else(|| hit.detail.clone()),
        belief_agent: hit.agent.unwrap_or_else(|| signal.source_agent.clone()),
        confidence,
        severity: rule.initial_severity,
        likelihood,
        expiry: rule.validity_ticks.map(|d| Tick(signal.timestamp.get() + d)),
        attenuation: rule.attenuation.unwrap_or(1.0),
        evidence_links: hit.links,
        detail: hit.detail,
    }
}

fn contains_ci(text: &str, needle: &str) -> bool {
    text.to_lowercase().contains(&needle.to_lowercase())
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn evaluate(p: &Predicate, signal: &Signal) -> Option<Hit> {
    use Predicate::*;
    let traces = signal.traces();
    match (p, &signal.content) {
        (MissingFields { fields }, SignalContent::Measurement(m)) => {
            let hits: Vec<&String> = m
                .missing
                .iter()
                .filter(|f| fields.is_empty() || fields.contains(f))
                .collect();
            (!hits.is_empty()).then(|| {
                let names: Vec<&str> = hits.iter().map(|s| s.as_str()).collect();
                Hit::new(format!("{} report lacks {}", m.report, names.join(", ")))
            })
        }
        (OutOfRange { field, min, max }, SignalContent::Measurement(m)) => m
            .values
            .get(field)
            .filter(|v| **v < *min || **v > *max)
            .map(|v| Hit::new(format!("{field} = {v} outside [{min}, {max}]"))),
        (
            MeanShift {
                series,
                baseline,
                threshold,
            },
            SignalContent::Measurement(m),
        ) => {
            let mu = mean(m.series.get(series)?)?;
            ((mu - baseline).abs() > *threshold)
                .then(|| Hit::new(format!("{series} mean {mu} shifted from baseline {baseline}")))
        }
        (SampleSpread { series, max_std }, SignalContent::Measurement(m)) => {
            let xs = m.series.get(series)?;
            let mu = mean(xs)?;
            let var = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / xs.len() as f64;
            let sd = var.sqrt();
            (sd > *max_std).then(|| Hit::new(format!("{series} spread {sd} exceeds {max_std}")))
        }
        (CrossSourceMismatch { tolerance }, SignalContent::Measurement(m)) => m
            .values
            .iter()
            .find_map(|(k, v)| {
                let other = m.cross_check.get(k)?;
                ((v - other).abs() > *tolerance).then(|| {
                    Hit::new(format!("{k} reported as {v} and {other} by independent sources"))
                })
            }),
        (AgentDivergence, SignalContent::Reasoning(_)) => {
            let conclusions: BTreeSet<String> = traces
                .iter()
                .map(|t| t.conclusion.trim().to_lowercase())
                .collect();
            if conclusions.len() < 2 {
                return None;
            }
            let primary = traces
                .iter()
                .fold(None::<&ReasoningTrace>, |best, t| match best {
                    Some(b) if b.confidence >= t.confidence => Some(b),
                    _ => Some(t),
                })?;
            let agents: Vec<&str> = traces.iter().map(|t| t.agent.as_str()).collect();
            let mut hit = Hit::from_trace(
                format!("agents {} reached different conclusions", agents.join(", ")),
                primary,
            );
            hit.links = traces
                .iter()
                .flat_map(|t| t.evidence_links.iter().cloned())
                .collect();
            Some(hit)
        }
        (LowConfidence { below }, SignalContent::Reasoning(_)) => traces
            .iter()
            .find(|t| t.confidence < *below)
            .map(|t| Hit::from_trace(format!("{} states confidence {}", t.agent, t.confidence), t)),
        (UnsupportedConclusion, SignalContent::Reasoning(_)) => traces
            .iter()
            .find(|t| t.evidence_links.is_empty())
            .map(|t| Hit::from_trace(format!("{} cites no evidence", t.agent), t)),
        (MissingToolInvocation { tool }, SignalContent::Reasoning(_)) => traces
            .iter()
            .find(|t| !t.tools_invoked.contains(tool))
            .map(|t| Hit::from_trace(format!("{} did not invoke {tool}", t.agent), t)),
        (CalibrationGap { delta }, SignalContent::Reasoning(_)) => {
            let delta = delta.unwrap_or(DEFAULT_CALIBRATION_DELTA);
            traces.iter().find_map(|t| {
                let fused = t.reference_confidence?;
                ((t.confidence - fused).abs() > delta).then(|| {
                    let mut hit = Hit::from_trace(
                        format!(
                            "{} states confidence {} while fused confidence is {fused:.4}",
                            t.agent, t.confidence
                        ),
                        t,
                    );
                    hit.statement = Some(format!("confidence stated by {} is calibrated", t.agent));
                    hit.stated_confidence = None;
                    hit
                })
            })
        }
        (ContextMismatch { key, expected }, SignalContent::Reasoning(_)) => traces.iter().find_map(|t| {
            let got = t.context.get(key)?;
            (got != expected).then(|| {
                Hit::from_trace(format!("{} applied in {key}={got}, built for {expected}", t.agent), t)
            })
        }),
        (AmbiguousTerm { terms }, _) => {
            let text = signal.text()?;
            terms
                .iter()
                .find(|term| contains_ci(text, term))
                .map(|term| Hit::new(format!("ambiguous term \"{term}\"")))
        }
        (SchemaInvalid, SignalContent::Message(m)) => {
            (!m.schema_valid).then(|| Hit::new("message failed schema validation".into()))
        }
        (ConcurrencyConflict, SignalContent::Message(m)) => (m.concurrent_writers > 1)
            .then(|| Hit::new(format!("{} agents wrote concurrently", m.concurrent_writers))),
        (FeedbackLoop { min_rounds }, SignalContent::Message(m)) => (m.round >= *min_rounds)
            .then(|| Hit::new(format!("exchange reached round {}", m.round))),
        (HedgedLanguage { markers }, _) => {
            let text = signal.text()?;
            let found = markers.iter().find(|mk| contains_ci(text, mk))?;
            let mut hit = Hit::new(format!("hedged wording \"{found}\""));
            if let SignalContent::HumanInput(h) = &signal.content {
                hit.statement = Some(text.to_string());
                hit.agent = Some(h.human.clone());
            }
            Some(hit)
        }
        (OverrideRate { max_rate }, SignalContent::Operational(o)) => {
            if o.decisions == 0 {
                return None;
            }
            let rate = o.overrides as f64 / o.decisions as f64;
            (rate > *max_rate).then(|| {
                Hit::new(format!("{} of {} decisions overridden", o.overrides, o.decisions))
            })
        }
        (RepeatedEscalations { min }, SignalContent::Operational(o)) => (o.escalations >= *min)
            .then(|| Hit::new(format!("{} escalations in window", o.escalations))),
        (InfrastructureChange { components }, SignalContent::InfrastructureChange(c)) => {
            (components.is_empty() || components.contains(&c.component))
                .then(|| Hit::new(format!("{}: {}", c.component, c.change)))
        }
        _ => None,
    }
}
