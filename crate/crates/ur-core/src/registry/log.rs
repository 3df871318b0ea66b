//! JSON Lines persistence: a header record, then one event per line.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::RegistryError;
use crate::canonical;
use crate::lifecycle::LifecycleEvent;
use crate::model::{EventId, RecordId, Tick, UncertaintyRecord};
use crate::policy::Policy;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    policy: Policy,
}

/// The persisted event log together with the policy it started under.
#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    pub policy: Policy,
    pub events: Vec<LifecycleEvent>,
}

impl EventLog {
    pub fn new(policy: Policy) -> Self {
        EventLog {
            policy,
            events: Vec::new(),
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = canonical::to_string(&Header {
            format_version: FORMAT_VERSION,
            policy: self.policy.clone(),
        });
        out.push('\n');
        for e in &self.events {
            out.push_str(&canonical::to_string(e));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<EventLog, RegistryError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, head) = lines
            .next()
            .ok_or_else(|| RegistryError::CorruptLog("missing header record".into()))?;
        let header: Header = serde_json::from_str(head)
            .map_err(|e| RegistryError::CorruptLog(format!("header: {e}")))?;
        if header.format_version != FORMAT_VERSION {
            return Err(RegistryError::CorruptLog(format!(
                "unsupported format_version {}",
                header.format_version
            )));
        }
        let violations = header.policy.violations();
        if !violations.is_empty() {
            return Err(RegistryError::CorruptLog(format!(
                "header policy invalid: {}",
                violations.join("; ")
            )));
        }
        let events = lines
            .map(|(n, line)| {
                serde_json::from_str(line)
                    .map_err(|e| RegistryError::CorruptLog(format!("line {}: {e}", n + 1)))
            })
            .collect::<Result<_, _>>()?;
        Ok(EventLog {
            policy: header.policy,
            events,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub upstream: RecordId,
    pub downstream: RecordId,
    pub attenuation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrySnapshot {
    pub format_version: u32,
    pub records: BTreeMap<RecordId, UncertaintyRecord>,
    pub edges: Vec<Edge>,
    pub last_event_id: EventId,
    pub now: Tick,
    pub policy_version: String,
}

impl RegistrySnapshot {
    pub fn to_canonical(&self) -> String {
        canonical::to_string(self)
    }

    pub fn record(&self, id: RecordId) -> Option<&UncertaintyRecord> {
        self.records.get(&id)
    }
}
