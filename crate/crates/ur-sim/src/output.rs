use std::path::Path;

use ur_core::policy::Policy;
use ur_core::registry::{EventLog, Registry};

use crate::sim::{Mode, Simulation};
use crate::trace::{build, TraceReport, TraceStatus};
use crate::{Scenario, SimError};

pub const LOG_FILE: &str = "log.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.json";
pub const TRACE_JSON_FILE: &str = "trace.json";
pub const TRACE_TEXT_FILE: &str = "trace.txt";

/// Everything a batch run produces, as the bytes written to disk.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub log: String,
    pub snapshot: String,
    pub report: TraceReport,
    pub report_json: String,
    pub report_text: String,
}

impl Simulation {
    pub fn report(&self) -> TraceReport {
        let s = self.scenario();
        build(
            &s.name,
            self.seed(),
            s.ticks,
            self.registry(),
            &self.rules(),
            self.markers(),
            s.expected_trace.as_deref(),
        )
    }
}

fn snapshot_text(registry: &Registry) -> String {
    registry.log_snapshot().to_canonical() + "\n"
}

/// Runs `scenario` to completion in memory.
pub fn simulate(scenario: &Scenario, policy: &Policy, seed: u64) -> Result<RunOutput, SimError> {
    let mut sim = Simulation::new(scenario.clone(), policy.clone(), seed, Mode::Batch)?;
    sim.run_to_end()?;
    let report = sim.report();
    Ok(RunOutput {
        log: sim.registry().event_log().to_jsonl(),
        snapshot: snapshot_text(sim.registry()),
        report_json: report.to_canonical() + "\n",
        report_text: report.to_text(),
        report,
    })
}

/// Runs `scenario` and writes log, snapshot and trace report into `out_dir`.
/// Outputs are written even when the golden trace diverges; the divergence
/// is then returned as [`SimError::TraceMismatch`].
pub fn run(
    scenario: &Scenario,
    policy: &Policy,
    seed: u64,
    out_dir: &Path,
) -> Result<RunOutput, SimError> {
    let out = simulate(scenario, policy, seed)?;
    std::fs::create_dir_all(out_dir).map_err(|e| SimError::io(out_dir, e))?;
    for (name, text) in [
        (LOG_FILE, &out.log),
        (SNAPSHOT_FILE, &out.snapshot),
        (TRACE_JSON_FILE, &out.report_json),
        (TRACE_TEXT_FILE, &out.report_text),
    ] {
        let p = out_dir.join(name);
        std::fs::write(&p, text).map_err(|e| SimError::io(&p, e))?;
    }
    if out.report.status == TraceStatus::Fail {
        return Err(SimError::TraceMismatch(
            out.report.first_divergence.clone().unwrap_or_default(),
        ));
    }
    Ok(out)
}

/// Rebuilds a registry from log text and returns its canonical snapshot.
pub fn replay_log(text: &str) -> Result<String, SimError> {
    let log = EventLog::parse(text)?;
    Ok(snapshot_text(&Registry::replay(&log)?))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerifyOutcome {
    Identical,
    /// Byte offset of the first difference.
    Differs { at: usize },
}

pub fn verify_snapshot(log_text: &str, expected: &[u8]) -> Result<VerifyOutcome, SimError> {
    let got = replay_log(log_text)?;
    let got = got.as_bytes();
    if got == expected {
        return Ok(VerifyOutcome::Identical);
    }
    let at = got
        .iter()
        .zip(expected)
        .position(|(a, b)| a != b)
        .unwrap_or(got.len().min(expected.len()));
    Ok(VerifyOutcome::Differs { at })
}
