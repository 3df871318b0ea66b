//! Deterministic scenario simulation over the ur-core pipeline.
//!
//! A [`Scenario`] scripts signals, agent outputs, infrastructure changes and
//! human decisions against logical ticks. [`Simulation`] drives them through
//! the Observer, detectors, Constructor, Evolver, timers, Orchestrator and
//! Commander once per tick; [`run`] writes the resulting log, snapshot and
//! trace report.

pub mod bundled;
mod noise;
mod output;
mod scenario;
mod sim;
mod trace;

use std::path::Path;

use thiserror::Error;
use ur_core::escalation::EscalationError;
use ur_core::governor::GovernError;
use ur_core::registry::RegistryError;

pub use noise::item_rng;
pub use output::{replay_log, run, simulate, verify_snapshot, RunOutput, VerifyOutcome};
pub use scenario::{
    parse_rule_set, AgentOutput, InfrastructureItem, ItemKind, Scenario, ScriptItem,
    ScriptedDecision, TraceAssertion, SCENARIO_FORMAT_VERSION,
};
pub use sim::{Mode, Simulation, StepOutcome, TickMarker};
pub use trace::{AssertionResult, Coverage, TraceReport, TraceStatus, TransitionLine};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario invalid: {0}")]
    ScenarioInvalid(String),
    #[error("trace mismatch: {0}")]
    TraceMismatch(String),
    #[error(transparent)]
    Govern(#[from] GovernError),
    #[error(transparent)]
    Escalation(#[from] EscalationError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl SimError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        SimError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}

impl Scenario {
    /// Reads a scenario file; asset paths inside it are relative to its directory.
    pub fn load(path: &Path) -> Result<Scenario, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Scenario::parse(&text, &|rel| {
            let p = dir.join(rel);
            std::fs::read_to_string(&p).map_err(|e| SimError::io(&p, e))
        })
    }
}
