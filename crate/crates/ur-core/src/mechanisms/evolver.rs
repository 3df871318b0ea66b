//! Log-odds evidence fusion.

use crate::lifecycle::Reassessment;
use crate::model::{EvidenceItem, ModelError, RiskAssessment, UncertaintyRecord};

/// Confidence is clamped to `[LOGIT_CLAMP, 1 - LOGIT_CLAMP]` before `logit`.
pub const LOGIT_CLAMP: f64 = 1e-6;

pub fn logit(p: f64) -> f64 {
    let p = p.clamp(LOGIT_CLAMP, 1.0 - LOGIT_CLAMP);
    (p / (1.0 - p)).ln()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `c' = sigmoid(logit(c) + sum(w_i * s_i))`.
///
/// A zero sum returns `c` unchanged. A positive sum never returns less than
/// `c`, a negative one never more, even when `c` sits inside the clamp band.
pub fn fuse_confidence<'a>(c: f64, evidence: impl IntoIterator<Item = &'a EvidenceItem>) -> f64 {
    let sum: f64 = evidence.into_iter().map(EvidenceItem::contribution).sum();
    if sum == 0.0 {
        return c;
    }
    let fused = sigmoid(logit(c) + sum);
    if sum > 0.0 {
        fused.max(c)
    } else {
        fused.min(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evolution {
    pub confidence: f64,
    pub risk: RiskAssessment,
}

/// The Evolver: fuse `evidence` into confidence and apply any explicit
/// re-assessment to severity and likelihood. Fusion never touches severity.
pub fn evolve(
    record: &UncertaintyRecord,
    evidence: &[EvidenceItem],
    reassessment: Option<&Reassessment>,
) -> Result<Evolution, ModelError> {
    let confidence = fuse_confidence(record.confidence(), evidence);
    let mut risk = record.risk();
    if let Some(r) = reassessment {
        if let Some(s) = r.severity {
            risk = risk.with_severity(s)?;
        }
        if let Some(l) = r.likelihood {
            risk = risk.with_likelihood(l)?;
        }
    }
    Ok(Evolution { confidence, risk })
}
