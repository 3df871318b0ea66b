//! Scenarios, rule sets and the default policy compiled into the binary.

use ur_core::policy::{load_policy, Policy};

use crate::{Scenario, SimError};

const FILES: &[(&str, &str)] = &[
    ("policies/default.json", include_str!("../assets/policies/default.json")),
    ("rules/clinical.json", include_str!("../assets/rules/clinical.json")),
    (
        "scenarios/pda-missing-doppler.json",
        include_str!("../assets/scenarios/pda-missing-doppler.json"),
    ),
    (
        "scenarios/calibration-drift.json",
        include_str!("../assets/scenarios/calibration-drift.json"),
    ),
    (
        "scenarios/calibration-aligned.json",
        include_str!("../assets/scenarios/calibration-aligned.json"),
    ),
    (
        "scenarios/architectural-morphing.json",
        include_str!("../assets/scenarios/architectural-morphing.json"),
    ),
    ("scenarios/ward-round.json", include_str!("../assets/scenarios/ward-round.json")),
    ("scenarios/empty.json", include_str!("../assets/scenarios/empty.json")),
];

pub const SCENARIOS: &[&str] = &[
    "pda-missing-doppler",
    "calibration-drift",
    "calibration-aligned",
    "architectural-morphing",
    "ward-round",
    "empty",
];

/// Joins `rel` onto directory `base`, folding `.` and `..` segments.
fn join(base: &str, rel: &str) -> String {
    let mut parts: Vec<&str> = base.split('/').filter(|s| !s.is_empty()).collect();
    for seg in rel.split('/') {
        match seg {
            "" | "." => {}
            ".." => {
                parts.pop();
            }
            s => parts.push(s),
        }
    }
    parts.join("/")
}

/// A bundled file by its path under the asset root.
pub fn asset(path: &str) -> Option<&'static str> {
    let path = join("", path);
    FILES.iter().find(|(p, _)| *p == path).map(|(_, text)| *text)
}

/// Every bundled file with its path under the asset root.
pub fn files() -> impl Iterator<Item = (&'static str, &'static str)> {
    FILES.iter().copied()
}

pub fn scenario(name: &str) -> Result<Scenario, SimError> {
    let text = asset(&format!("scenarios/{name}.json"))
        .ok_or_else(|| SimError::ScenarioInvalid(format!("no bundled scenario \"{name}\"")))?;
    Scenario::parse(text, &|rel| {
        let path = join("scenarios", rel);
        asset(&path)
            .map(str::to_owned)
            .ok_or_else(|| SimError::ScenarioInvalid(format!("no bundled asset {path}")))
    })
}

pub fn default_policy() -> Policy {
    load_policy(asset("policies/default.json").expect("bundled")).expect("bundled policy is valid")
}
