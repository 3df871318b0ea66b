use std::collections::{BTreeMap, BTreeSet};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use super::signal::{Layer, Measurement, ReasoningTraces, Signal, SignalContent};
use crate::model::{ActorId, Tick};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed input: {0}")]
pub struct MalformedInput(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Channel {
    Measurement,
    Reasoning,
    Message,
    HumanInput,
    Operational,
    InfrastructureChange,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeasurement {
    report: String,
    #[serde(default)]
    values: BTreeMap<String, Option<f64>>,
    #[serde(default)]
    series: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    cross_check: BTreeMap<String, f64>,
}

/// The Observer: turns raw channel messages into signals.
///
/// Raw inputs are JSON objects tagged by `channel`, carrying `agent` and
/// optional `topic` and `scope`. Measurement reports are checked against the
/// mandatory-field schema for their report name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Observer {
    /// Report name to mandatory value fields.
    #[serde(default)]
    pub schemas: BTreeMap<String, Vec<String>>,
}

impl Observer {
    pub fn new(schemas: BTreeMap<String, Vec<String>>) -> Self {
        Observer { schemas }
    }

    /// Accepts a single message or an array of messages; order is preserved.
    pub fn observe(&self, raw: &Value, now: Tick) -> Result<Vec<Signal>, MalformedInput> {
        match raw {
            Value::Array(items) => items.iter().map(|v| self.observe_one(v, now)).collect(),
            other => Ok(vec![self.observe_one(other, now)?]),
        }
    }

    fn observe_one(&self, raw: &Value, now: Tick) -> Result<Signal, MalformedInput> {
        let mut obj = raw
            .as_object()
            .cloned()
            .ok_or_else(|| MalformedInput("input is not a JSON object".into()))?;
        let channel: Channel = take(&mut obj, "channel")?
            .ok_or_else(|| MalformedInput("missing `channel`".into()))?;
        let agent: ActorId =
            take(&mut obj, "agent")?.ok_or_else(|| MalformedInput("missing `agent`".into()))?;
        let topic: Option<String> = take(&mut obj, "topic")?;
        let scope: BTreeSet<String> = take(&mut obj, "scope")?.unwrap_or_default();
        let rest = Value::Object(obj);

        let (layer, content) = match channel {
            Channel::Measurement => {
                let m: RawMeasurement = body(rest)?;
                (Layer::Data, SignalContent::Measurement(self.normalize(m)))
            }
            Channel::Reasoning => (Layer::Reasoning, SignalContent::Reasoning(body(rest)?)),
            Channel::Message => (Layer::Interaction, SignalContent::Message(body(rest)?)),
            Channel::HumanInput => (Layer::Interaction, SignalContent::HumanInput(body(rest)?)),
            Channel::Operational => (Layer::Operational, SignalContent::Operational(body(rest)?)),
            Channel::InfrastructureChange => (
                Layer::Operational,
                SignalContent::InfrastructureChange(body(rest)?),
            ),
        };
        let topic = topic.unwrap_or_else(|| match &content {
            SignalContent::Measurement(m) => m.report.clone(),
            SignalContent::InfrastructureChange(c) => c.component.clone(),
            _ => String::new(),
        });
        if let SignalContent::Reasoning(ReasoningTraces { traces }) = &content {
            for t in traces {
                if !(0.0..=1.0).contains(&t.confidence) || !t.weight.is_finite() || t.weight < 0.0 {
                    return Err(MalformedInput(format!(
                        "trace from {} has confidence {} and weight {}",
                        t.agent, t.confidence, t.weight
                    )));
                }
            }
        }
        Ok(Signal {
            timestamp: now,
            layer,
            source_agent: agent,
            topic,
            scope,
            content,
        })
    }

    fn normalize(&self, raw: RawMeasurement) -> Measurement {
        let mut values = BTreeMap::new();
        let mut missing = Vec::new();
        for (k, v) in raw.values {
            match v {
                Some(x) => {
                    values.insert(k, x);
                }
                None => missing.push(k),
            }
        }
        if let Some(required) = self.schemas.get(&raw.report) {
            for field in required {
                if !values.contains_key(field) && !missing.contains(field) {
                    missing.push(field.clone());
                }
            }
        }
        missing.sort();
        Measurement {
            complete: missing.is_empty(),
            report: raw.report,
            values,
            series: raw.series,
            cross_check: raw.cross_check,
            missing,
        }
    }
}

fn take<T: DeserializeOwned>(
    obj: &mut Map<String, Value>,
    key: &str,
) -> Result<Option<T>, MalformedInput> {
    obj.remove(key)
        .map(|v| serde_json::from_value(v).map_err(|e| MalformedInput(format!("`{key}`: {e}"))))
        .transpose()
}

fn body<T: DeserializeOwned>(rest: Value) -> Result<T, MalformedInput> {
    serde_json::from_value(rest).map_err(|e| MalformedInput(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn observer() -> Observer {
        Observer::new(BTreeMap::from([(
            "echo".to_string(),
            vec!["lv_ef".to_string(), "ductal_doppler".to_string()],
        )]))
    }

    #[test]
    fn complete_measurement() {
        let raw = json!({"channel": "measurement", "agent": "echo-cart", "report": "echo",
                         "values": {"lv_ef": 0.6, "ductal_doppler": 1.2}});
        let s = observer().observe(&raw, Tick(3)).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].layer, Layer::Data);
        assert_eq!(s[0].timestamp, Tick(3));
        assert_eq!(s[0].topic, "echo");
        let SignalContent::Measurement(m) = &s[0].content else { panic!() };
        assert!(m.complete);
    }

    #[test]
    fn missing_mandatory_field_is_flagged_not_rejected() {
        let raw = json!({"channel": "measurement", "agent": "echo-cart", "report": "echo",
                         "values": {"lv_ef": 0.6}});
        let s = observer().observe(&raw, Tick(1)).unwrap();
        let SignalContent::Measurement(m) = &s[0].content else { panic!() };
        assert!(!m.complete);
        assert_eq!(m.missing, vec!["ductal_doppler".to_string()]);
    }

    #[test]
    fn null_value_counts_as_missing() {
        let raw = json!({"channel": "measurement", "agent": "a", "report": "other",
                         "values": {"x": null}});
        let s = observer().observe(&raw, Tick(1)).unwrap();
        let SignalContent::Measurement(m) = &s[0].content else { panic!() };
        assert_eq!(m.missing, vec!["x".to_string()]);
    }

    #[test]
    fn batch_preserves_order() {
        let raw = json!([
            {"channel": "message", "agent": "a", "text": "first"},
            {"channel": "operational", "agent": "ops", "overrides": 4},
            {"channel": "message", "agent": "b", "text": "third"},
        ]);
        let s = observer().observe(&raw, Tick(2)).unwrap();
        let texts: Vec<_> = s.iter().map(|x| x.text().map(str::to_owned)).collect();
        assert_eq!(
            texts,
            vec![Some("first".to_string()), None, Some("third".to_string())]
        );
        assert_eq!(s[1].layer, Layer::Operational);
    }

    #[test]
    fn malformed_inputs() {
        let o = observer();
        assert!(o.observe(&json!("text"), Tick(1)).is_err());
        assert!(o.observe(&json!({"agent": "a"}), Tick(1)).is_err());
        assert!(o
            .observe(&json!({"channel": "teleport", "agent": "a"}), Tick(1))
            .is_err());
        assert!(o
            .observe(&json!({"channel": "message", "agent": "a"}), Tick(1))
            .is_err());
        let bad_conf = json!({"channel": "reasoning", "agent": "r",
            "traces": [{"agent": "r", "conclusion": "x", "confidence": 1.5}]});
        assert!(o.observe(&bad_conf, Tick(1)).is_err());
    }
}
