use serde::{Deserialize, Serialize};

use super::{ActorId, EvidenceId, ModelError, Tick};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceSource {
    Observation,
    AgentReasoning,
    HumanProvided,
    TimerExpiration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Supporting,
    Conflicting,
    Neutral,
}

impl Polarity {
    /// Sign used by log-odds fusion.
    pub fn sign(self) -> f64 {
        match self {
            Polarity::Supporting => 1.0,
            Polarity::Conflicting => -1.0,
            Polarity::Neutral => 0.0,
        }
    }
}

/// One time-indexed element of a record's accumulated evidence.
///
/// `id` and `timestamp` are stamped by the registry when the carrying event is
/// appended; drafts built with [`EvidenceItem::draft`] leave them empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceItem {
    pub id: EvidenceId,
    pub timestamp: Tick,
    pub source: EvidenceSource,
    pub polarity: Polarity,
    pub weight: f64,
    pub payload: String,
    pub origin_agent: ActorId,
}

impl EvidenceItem {
    pub fn draft(
        source: EvidenceSource,
        polarity: Polarity,
        weight: f64,
        payload: impl Into<String>,
        origin_agent: impl Into<ActorId>,
    ) -> Result<Self, ModelError> {
        let item = EvidenceItem {
            id: EvidenceId::default(),
            timestamp: Tick::ZERO,
            source,
            polarity,
            weight,
            payload: payload.into(),
            origin_agent: origin_agent.into(),
        };
        item.validate()?;
        Ok(item)
    }

    /// Neutral zero-weight marker recorded when a deadline elapses.
    pub fn timer(deadline: Tick) -> Self {
        EvidenceItem {
            id: EvidenceId::default(),
            timestamp: Tick::ZERO,
            source: EvidenceSource::TimerExpiration,
            polarity: Polarity::Neutral,
            weight: 0.0,
            payload: format!("validity deadline {deadline} elapsed"),
            origin_agent: ActorId::registry(),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.weight.is_finite() || self.weight < 0.0 {
            return Err(ModelError::InvalidEvidence(format!(
                "weight must be finite and non-negative, got {}",
                self.weight
            )));
        }
        if self.source == EvidenceSource::TimerExpiration
            && (self.polarity != Polarity::Neutral || self.weight != 0.0)
        {
            return Err(ModelError::InvalidEvidence(
                "timer-expiration evidence must be neutral with zero weight".into(),
            ));
        }
        Ok(())
    }

    /// Signed log-odds contribution `w * s`.
    pub fn contribution(&self) -> f64 {
        self.weight * self.polarity.sign()
    }
}
