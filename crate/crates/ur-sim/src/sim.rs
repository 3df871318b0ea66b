use serde::Serialize;
use serde_json::Value;
use ur_core::escalation::{list_escalations, submit_decision, DecisionRequest};
use ur_core::governor::{adapt, expire_due, ingest};
use ur_core::mechanisms::{bind_rules, DetectorRule, Observer};
use ur_core::model::{EventId, Tick};
use ur_core::policy::Policy;
use ur_core::registry::Registry;

use crate::noise::{item_rng, substitute};
use crate::scenario::{ItemKind, Scenario, ScriptItem, ScriptedDecision};
use crate::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Runs every scripted item, including human decisions.
    Batch,
    /// Leaves decisions to a live operator and will not advance past a tick
    /// while an escalation is open.
    Interactive,
}

/// What happened during one tick.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TickMarker {
    pub tick: Tick,
    pub events: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_event: Option<EventId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum StepOutcome {
    Advanced(TickMarker),
    /// Open escalations block the next tick.
    Paused { next_tick: Tick, pending: Vec<EventId> },
    Finished,
}

pub struct Simulation {
    scenario: Scenario,
    seed: u64,
    mode: Mode,
    registry: Registry,
    observer: Observer,
    next_tick: u64,
    markers: Vec<TickMarker>,
}

impl Simulation {
    pub fn new(scenario: Scenario, policy: Policy, seed: u64, mode: Mode) -> Result<Self, SimError> {
        let violations = policy.violations();
        if !violations.is_empty() {
            return Err(SimError::ScenarioInvalid(format!(
                "policy rejected: {}",
                violations.join("; ")
            )));
        }
        scenario.validate()?;
        Ok(Simulation {
            observer: Observer::new(scenario.schemas.clone()),
            registry: Registry::new(policy),
            scenario,
            seed,
            mode,
            next_tick: 1,
            markers: Vec::new(),
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    /// For operator actions between ticks.
    pub fn registry_mut(&mut self) -> &mut Registry {
        &mut self.registry
    }

    pub fn markers(&self) -> &[TickMarker] {
        &self.markers
    }

    /// The next tick to run, or `ticks + 1` once finished.
    pub fn next_tick(&self) -> Tick {
        Tick(self.next_tick)
    }

    pub fn finished(&self) -> bool {
        self.next_tick > self.scenario.ticks
    }

    /// Policy detector rules followed by the scenario's, with policy defaults filled in.
    pub fn rules(&self) -> Vec<DetectorRule> {
        let policy = self.registry.policy();
        let all: Vec<DetectorRule> = policy
            .detector_rules
            .iter()
            .chain(&self.scenario.detector_rules)
            .cloned()
            .collect();
        bind_rules(&all, policy)
    }

    /// Runs one tick: scripted items in script order, then timers, then one
    /// Orchestrator/Commander pass. Propagation runs inside each append.
    pub fn step(&mut self) -> Result<StepOutcome, SimError> {
        if self.finished() {
            return Ok(StepOutcome::Finished);
        }
        if self.mode == Mode::Interactive {
            let pending: Vec<EventId> = list_escalations(&self.registry).iter().map(|t| t.id).collect();
            if !pending.is_empty() {
                return Ok(StepOutcome::Paused {
                    next_tick: Tick(self.next_tick),
                    pending,
                });
            }
        }
        let tick = Tick(self.next_tick);
        let before = self.registry.log().len();
        self.registry.advance_to(tick)?;
        let items: Vec<(usize, ScriptItem)> = self
            .scenario
            .script
            .iter()
            .enumerate()
            .filter(|(_, it)| it.at == tick.get())
            .map(|(i, it)| (i, it.clone()))
            .collect();
        for (index, item) in items {
            self.deliver(index, &item)?;
        }
        expire_due(&mut self.registry)?;
        adapt(&mut self.registry)?;

        let events = self.registry.log().len() - before;
        let marker = TickMarker {
            tick,
            events,
            first_event: (events > 0).then(|| self.registry.log()[before].id),
        };
        self.markers.push(marker.clone());
        self.next_tick += 1;
        Ok(StepOutcome::Advanced(marker))
    }

    /// Steps until the last tick. In interactive mode stops early when paused.
    pub fn run_to_end(&mut self) -> Result<StepOutcome, SimError> {
        loop {
            match self.step()? {
                StepOutcome::Advanced(_) => continue,
                other => return Ok(other),
            }
        }
    }

    fn deliver(&mut self, index: usize, item: &ScriptItem) -> Result<(), SimError> {
        let now = self.registry.now();
        let raw = match item.kind {
            ItemKind::InjectSignal => substitute(&item.payload, &mut item_rng(self.seed, index))?,
            ItemKind::AgentOutput => with_channel(&item.payload, "reasoning"),
            ItemKind::InfrastructureChange => with_channel(&item.payload, "infrastructure_change"),
            ItemKind::HumanDecisionScript => {
                if self.mode == Mode::Batch {
                    let d: ScriptedDecision = serde_json::from_value(item.payload.clone())
                        .map_err(|e| SimError::ScenarioInvalid(format!("item {index}: {e}")))?;
                    self.decide(index, &d)?;
                }
                return Ok(());
            }
        };
        let signals = self
            .observer
            .observe(&raw, now)
            .map_err(|e| SimError::ScenarioInvalid(format!("item {index}: {e}")))?;
        let rules = self.rules();
        for signal in signals {
            ingest(&mut self.registry, signal, &rules)?;
        }
        Ok(())
    }

    fn decide(&mut self, index: usize, d: &ScriptedDecision) -> Result<(), SimError> {
        let task = list_escalations(&self.registry)
            .into_iter()
            .find(|t| {
                let rec = self.registry.record(t.record).expect("tasks name live records");
                rec.topic() == d.topic && d.leaf.is_none_or(|l| rec.kind().leaf() == l)
            })
            .ok_or_else(|| {
                SimError::ScenarioInvalid(format!(
                    "item {index}: no open escalation on topic \"{}\" at {}",
                    d.topic,
                    self.registry.now()
                ))
            })?;
        let request = DecisionRequest {
            task: task.id,
            human: d.human.clone(),
            role: d.role,
            action: d.action,
            justification: d.justification.clone(),
            authorized_actions: d.authorized_actions.clone(),
        };
        let rules = self.rules();
        submit_decision(&mut self.registry, &request, &rules)?;
        Ok(())
    }
}

fn with_channel(payload: &Value, channel: &str) -> Value {
    let mut v = payload.clone();
    if let Value::Object(m) = &mut v {
        m.insert("channel".into(), Value::from(channel));
    }
    v
}
