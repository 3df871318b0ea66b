//! The Reasoner: evidence synthesis from reasoning traces.

use super::signal::{Signal, SignalContent};
use crate::lifecycle::{EventBody, NewEvent};
use crate::model::{EvidenceItem, EvidenceSource, Leaf, ModelError, UncertaintyRecord};

fn live_on<'a>(records: &'a [&'a UncertaintyRecord], topic: &'a str) -> impl Iterator<Item = &'a UncertaintyRecord> {
    records
        .iter()
        .copied()
        .filter(move |r| !r.is_terminal() && r.topic() == topic)
}

/// Attaches to each trace the fused confidence of the tracing agent's own
/// standing belief on the signal's topic, so detectors can compare stated and
/// fused confidence without touching the registry.
pub fn attach_references(signal: &mut Signal, records: &[&UncertaintyRecord]) {
    let topic = signal.topic.clone();
    let SignalContent::Reasoning(r) = &mut signal.content else {
        return;
    };
    for trace in &mut r.traces {
        trace.reference_confidence = live_on(records, &topic)
            .filter(|rec| rec.kind().leaf() != Leaf::Calibration)
            .find(|rec| rec.belief_agent() == &trace.agent)
            .map(|rec| rec.confidence());
    }
}

/// One evidence event per (trace with a stance, live record on the topic).
pub fn synthesize(
    signal: &Signal,
    records: &[&UncertaintyRecord],
) -> Result<Vec<NewEvent>, ModelError> {
    let mut out = Vec::new();
    for trace in signal.traces() {
        let Some(stance) = trace.stance else {
            continue;
        };
        for record in live_on(records, &signal.topic) {
            let item = EvidenceItem::draft(
                EvidenceSource::AgentReasoning,
                stance,
                trace.weight,
                trace.conclusion.clone(),
                trace.agent.clone(),
            )?;
            out.push(NewEvent::new(
                signal.timestamp,
                record.id(),
                trace.agent.clone(),
                EventBody::EvidenceAccumulated {
                    evidence: vec![item],
                    reassessment: trace.reassessment,
                    derived_from: None,
                    task: None,
                },
            ));
        }
    }
    Ok(out)
}
