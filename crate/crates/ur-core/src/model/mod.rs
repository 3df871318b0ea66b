//! Domain types shared by every other module: taxonomy, evidence, risk,
//! provenance and the uncertainty record itself.

mod evidence;
mod ids;
mod record;
mod risk;
mod taxonomy;

use thiserror::Error;

pub use evidence::{EvidenceItem, EvidenceSource, Polarity};
pub use ids::{ActorId, EventId, EvidenceId, RecordId, Tick};
pub use record::{
    Irreducibility, OntologicalContext, Provenance, RecordDraft, UncertaintyRecord,
    DEFAULT_CONFIDENCE,
};
pub use risk::{compute_risk, RiskAssessment};
pub use taxonomy::{validate_kind, Category, Family, Leaf, UncertaintyKind};

#[cfg(test)]
pub(crate) use record::tests::draft as test_draft;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid taxonomy triple ({category:?}, {family:?}, {leaf:?})")]
    InvalidKind {
        category: Category,
        family: Family,
        leaf: Leaf,
    },
    #[error("{field} out of range [0, 1]: {value}")]
    OutOfRange { field: &'static str, value: f64 },
    #[error("risk {risk} is not severity {severity} x likelihood {likelihood}")]
    InconsistentRisk {
        severity: f64,
        likelihood: f64,
        risk: f64,
    },
    #[error("invalid evidence: {0}")]
    InvalidEvidence(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
}

/// Where each element of the uncertainty tuple
/// `<type, scope, O, P, E, c, R, tau, U_up, U_down>` lives in a serialized record.
pub const TUPLE_FIELDS: [(&str, &str); 10] = [
    ("type", "kind"),
    ("scope", "scope"),
    ("O", "ontological_ctx"),
    ("P", "provenance"),
    ("E", "evidence"),
    ("c", "confidence"),
    ("R", "risk"),
    ("tau", "expiry"),
    ("U_up", "upstream"),
    ("U_down", "downstream"),
];
