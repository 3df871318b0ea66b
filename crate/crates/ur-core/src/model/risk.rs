use serde::{Deserialize, Serialize};

use super::ModelError;

/// Operational risk as `severity × likelihood`, all in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskAssessment {
    pub severity: f64,
    pub likelihood: f64,
    pub risk: f64,
}

pub(crate) fn check_unit(name: &'static str, value: f64) -> Result<f64, ModelError> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(ModelError::OutOfRange { field: name, value })
    }
}

pub fn compute_risk(severity: f64, likelihood: f64) -> Result<RiskAssessment, ModelError> {
    let severity = check_unit("severity", severity)?;
    let likelihood = check_unit("likelihood", likelihood)?;
    Ok(RiskAssessment {
        severity,
        likelihood,
        risk: severity * likelihood,
    })
}

impl RiskAssessment {
    pub fn with_severity(self, severity: f64) -> Result<Self, ModelError> {
        compute_risk(severity, self.likelihood)
    }

    pub fn with_likelihood(self, likelihood: f64) -> Result<Self, ModelError> {
        compute_risk(self.severity, likelihood)
    }

    pub(crate) fn validate(&self) -> Result<(), ModelError> {
        let fresh = compute_risk(self.severity, self.likelihood)?;
        if fresh.risk.to_bits() != self.risk.to_bits() {
            return Err(ModelError::InconsistentRisk {
                severity: self.severity,
                likelihood: self.likelihood,
                risk: self.risk,
            });
        }
        Ok(())
    }
}
