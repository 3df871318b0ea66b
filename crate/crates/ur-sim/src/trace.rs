//! Trace reports: the lifecycle transitions of a run, family and layer
//! coverage, and the golden-trace comparison.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use ur_core::canonical;
use ur_core::lifecycle::LifecycleState;
use ur_core::mechanisms::{DetectorRule, Layer};
use ur_core::model::{ActorId, Category, EventId, Family, Leaf, RecordId, Tick};
use ur_core::registry::{AuditEntry, Registry};

use crate::scenario::TraceAssertion;
use crate::sim::TickMarker;

const CONFIDENCE_TOLERANCE: f64 = 1e-9;

/// One state change, with the record as it stood right after it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionLine {
    pub event: EventId,
    pub tick: Tick,
    pub record: RecordId,
    pub category: Category,
    pub family: Family,
    pub leaf: Leaf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub from: Option<LifecycleState>,
    pub to: LifecycleState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub guard: Option<String>,
    pub bypass: bool,
    pub actor: ActorId,
    pub confidence: f64,
    pub risk: f64,
    pub residual: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coverage {
    /// Records created per family.
    pub families: BTreeMap<Family, usize>,
    /// Records created per detection layer.
    pub layers: BTreeMap<Layer, usize>,
    pub missing_families: Vec<Family>,
    pub missing_layers: Vec<Layer>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssertionResult {
    pub assertion: TraceAssertion,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matched_event: Option<EventId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStatus {
    Pass,
    Fail,
    /// The scenario has no expected trace.
    Unchecked,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceReport {
    pub format_version: u32,
    pub scenario: String,
    pub seed: u64,
    pub ticks: u64,
    pub status: TraceStatus,
    pub timeline: Vec<TickMarker>,
    pub transitions: Vec<TransitionLine>,
    pub coverage: Coverage,
    pub assertions: Vec<AssertionResult>,
    /// Human-readable description of the first failed assertion.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_divergence: Option<String>,
}

fn line(entry: &AuditEntry, reg: &Registry) -> Option<TransitionLine> {
    let to = entry.new_state?;
    if entry.prior_state == Some(to) {
        return None;
    }
    let rid = entry.event.target?;
    let rec = reg.record(rid)?;
    Some(TransitionLine {
        event: entry.event.id,
        tick: entry.event.timestamp,
        record: rid,
        category: rec.kind().category(),
        family: rec.kind().family(),
        leaf: rec.kind().leaf(),
        from: entry.prior_state,
        to,
        row: entry.row,
        guard: entry.guard_fired.clone(),
        bypass: entry.bypass,
        actor: entry.actor.clone(),
        confidence: rec.confidence(),
        risk: rec.risk().risk,
        residual: rec.residual(),
    })
}

fn matches(a: &TraceAssertion, t: &TransitionLine) -> bool {
    t.tick.get() == a.at
        && t.leaf == a.leaf
        && t.to == a.state
        && a
            .confidence
            .is_none_or(|c| (t.confidence - c).abs() <= CONFIDENCE_TOLERANCE)
        && a.residual.is_none_or(|r| t.residual == r)
        && a.actor.as_deref().is_none_or(|x| t.actor.as_str() == x)
}

fn describe(a: &TraceAssertion) -> String {
    let mut s = format!("tick {}: {:?} record enters {}", a.at, a.leaf, a.state);
    if let Some(c) = a.confidence {
        let _ = write!(s, " with confidence {c}");
    }
    if let Some(r) = a.residual {
        let _ = write!(s, " residual={r}");
    }
    if let Some(x) = &a.actor {
        let _ = write!(s, " by {x}");
    }
    s
}

/// Builds the report from the registry's own log. `rules` maps each
/// record's detector to its layer.
pub(crate) fn build(
    scenario: &str,
    seed: u64,
    ticks: u64,
    registry: &Registry,
    rules: &[DetectorRule],
    timeline: &[TickMarker],
    expected: Option<&[TraceAssertion]>,
) -> TraceReport {
    let mut transitions = Vec::new();
    Registry::replay_with(&registry.event_log(), |entry, reg| {
        transitions.extend(line(entry, reg));
    })
    .expect("a registry's own log replays");

    let mut families: BTreeMap<Family, usize> = BTreeMap::new();
    let mut layers: BTreeMap<Layer, usize> = BTreeMap::new();
    for rec in registry.records() {
        *families.entry(rec.kind().family()).or_default() += 1;
        let layer = rec
            .annotations()
            .get("detector")
            .and_then(|id| rules.iter().find(|r| &r.id == id))
            .map(|r| r.layer);
        if let Some(l) = layer {
            *layers.entry(l).or_default() += 1;
        }
    }
    let coverage = Coverage {
        missing_families: Family::ALL.into_iter().filter(|f| !families.contains_key(f)).collect(),
        missing_layers: Layer::ALL.into_iter().filter(|l| !layers.contains_key(l)).collect(),
        families,
        layers,
    };

    let mut assertions = Vec::new();
    let mut first_divergence = None;
    let mut cursor = 0;
    for a in expected.unwrap_or_default() {
        let found = transitions[cursor..].iter().position(|t| matches(a, t));
        let matched_event = found.map(|i| {
            cursor += i + 1;
            transitions[cursor - 1].event
        });
        if matched_event.is_none() && first_divergence.is_none() {
            let near: Vec<String> = transitions
                .iter()
                .filter(|t| t.tick.get() == a.at && t.leaf == a.leaf)
                .map(|t| format!("{} -> {} (confidence {}, residual {}, by {})", t.record, t.to, t.confidence, t.residual, t.actor))
                .collect();
            first_divergence = Some(format!(
                "expected {}; observed at that tick: {}",
                describe(a),
                if near.is_empty() { "nothing".to_string() } else { near.join("; ") }
            ));
        }
        assertions.push(AssertionResult {
            assertion: a.clone(),
            matched_event,
        });
    }
    let status = match (expected, &first_divergence) {
        (None, _) => TraceStatus::Unchecked,
        (Some(_), None) => TraceStatus::Pass,
        (Some(_), Some(_)) => TraceStatus::Fail,
    };
    TraceReport {
        format_version: 1,
        scenario: scenario.to_string(),
        seed,
        ticks,
        status,
        timeline: timeline.to_vec(),
        transitions,
        coverage,
        assertions,
        first_divergence,
    }
}

impl TraceReport {
    pub fn to_canonical(&self) -> String {
        canonical::to_string(self)
    }

    pub fn to_text(&self) -> String {
        let status = match self.status {
            TraceStatus::Pass => "pass",
            TraceStatus::Fail => "FAIL",
            TraceStatus::Unchecked => "no expected trace",
        };
        let mut s = format!(
            "scenario {} (seed {}, {} ticks): {status}\n",
            self.scenario, self.seed, self.ticks
        );
        for m in &self.timeline {
            if m.events == 0 {
                let _ = writeln!(s, "tick {}: inert", m.tick.get());
                continue;
            }
            let _ = writeln!(s, "tick {}: {} events", m.tick.get(), m.events);
            for t in self.transitions.iter().filter(|t| t.tick == m.tick) {
                let from = t.from.map(|f| f.to_string()).unwrap_or_else(|| "new".into());
                let _ = writeln!(
                    s,
                    "  {} {:?}/{:?}: {from} -> {} by {} (c={:.4}, risk={:.4}{})",
                    t.record,
                    t.family,
                    t.leaf,
                    t.to,
                    t.actor,
                    t.confidence,
                    t.risk,
                    if t.residual { ", residual" } else { "" }
                );
            }
        }
        let list = |xs: Vec<String>| if xs.is_empty() { "none".to_string() } else { xs.join(", ") };
        let _ = writeln!(
            s,
            "families: {}",
            list(self.coverage.families.iter().map(|(f, n)| format!("{f:?} {n}")).collect())
        );
        let _ = writeln!(
            s,
            "layers: {}",
            list(self.coverage.layers.iter().map(|(l, n)| format!("{l:?} {n}")).collect())
        );
        if !self.assertions.is_empty() {
            let hit = self.assertions.iter().filter(|a| a.matched_event.is_some()).count();
            let _ = writeln!(s, "expected trace: {hit}/{} matched", self.assertions.len());
        }
        if let Some(d) = &self.first_divergence {
            let _ = writeln!(s, "first divergence: {d}");
        }
        s
    }
}
