#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use ur_core::lifecycle::{EventBody, LifecycleState, NewEvent, Reassessment};
use ur_core::model::{
    ActorId, EvidenceItem, EvidenceSource, Leaf, Polarity, Provenance, RecordDraft, RecordId,
    Tick, UncertaintyKind, UncertaintyRecord,
};
use ur_core::policy::Policy;
use ur_core::registry::Registry;

pub fn draft(leaf: Leaf, severity: f64, likelihood: f64) -> RecordDraft {
    RecordDraft {
        kind: UncertaintyKind::from_leaf(leaf),
        scope: BTreeSet::from(["echo-17".to_string()]),
        ontological_ctx: ur_core::model::OntologicalContext::for_kind(
            UncertaintyKind::from_leaf(leaf),
            "fixture",
        ),
        provenance: Provenance {
            created_by: ActorId::new("fixture"),
            created_at: Tick(1),
            valid_from: Tick(1),
            source_artifact: "fixture".into(),
        },
        confidence: None,
        severity,
        likelihood,
        expiry: None,
        belief_statement: "fixture belief".into(),
        belief_agent: ActorId::new("fixture"),
        topic: "fixture".into(),
        annotations: BTreeMap::new(),
    }
}

/// A record placed directly in `state`, bypassing the lifecycle.
pub fn record_in(
    state: LifecycleState,
    leaf: Leaf,
    severity: f64,
    likelihood: f64,
    expiry: Option<Tick>,
) -> UncertaintyRecord {
    let mut reg = Registry::new(Policy::default());
    let mut d = draft(leaf, severity, likelihood);
    d.expiry = expiry;
    reg.append(NewEvent::create(Tick(1), "fixture", d).unwrap()).unwrap();
    let mut v = serde_json::to_value(reg.record(RecordId(1)).unwrap()).unwrap();
    v["state"] = serde_json::to_value(state).unwrap();
    if state == LifecycleState::Escalated {
        v["escalation"] = serde_json::json!(1);
    }
    serde_json::from_value(v).unwrap()
}

pub fn item(polarity: Polarity, weight: f64) -> EvidenceItem {
    EvidenceItem::draft(EvidenceSource::Observation, polarity, weight, "obs", "fixture").unwrap()
}

pub fn reassess(severity: Option<f64>, likelihood: Option<f64>) -> EventBody {
    EventBody::EvidenceAccumulated {
        evidence: vec![],
        reassessment: Some(Reassessment {
            severity,
            likelihood,
        }),
        derived_from: None,
        task: None,
    }
}

/// A registry holding one Detected record per entry of `likelihoods`.
pub fn registry_with(likelihoods: &[(f64, f64)]) -> Registry {
    let mut reg = Registry::new(Policy::default());
    for (s, l) in likelihoods {
        reg.append(NewEvent::create(Tick(1), "fixture", draft(Leaf::Missing, *s, *l)).unwrap())
            .unwrap();
    }
    reg
}
