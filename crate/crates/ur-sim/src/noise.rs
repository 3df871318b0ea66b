//! Seeded noise for scripted payloads.
//!
//! A payload may contain `{"$noise": {...}}` placeholders anywhere in its
//! JSON tree. Each scripted item draws from its own ChaCha8 stream: the
//! scenario seed is the key and the item's index in the script selects the
//! stream, so adding or removing noise in one item never shifts another.
//!
//! Placeholder fields: `dist` (`normal` with `mean`, `std`; `uniform` with
//! `low`, `high`), optional `n` for a list of `n` samples, optional `round`
//! for the number of decimal places kept.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::Deserialize;
use serde_json::Value;

use crate::SimError;

const KEY: &str = "$noise";

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case", deny_unknown_fields)]
enum Spec {
    Normal {
        mean: f64,
        std: f64,
        #[serde(default)]
        n: Option<usize>,
        #[serde(default)]
        round: Option<u32>,
    },
    Uniform {
        low: f64,
        high: f64,
        #[serde(default)]
        n: Option<usize>,
        #[serde(default)]
        round: Option<u32>,
    },
}

pub fn item_rng(seed: u64, item: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(item as u64);
    rng
}

/// True when `payload` contains at least one placeholder.
pub fn has_noise(payload: &Value) -> bool {
    match payload {
        Value::Object(m) => m.contains_key(KEY) || m.values().any(has_noise),
        Value::Array(xs) => xs.iter().any(has_noise),
        _ => false,
    }
}

/// Checks every placeholder without drawing.
pub fn validate(payload: &Value) -> Result<(), SimError> {
    match payload {
        Value::Object(m) if m.contains_key(KEY) => spec(payload).map(|_| ()),
        Value::Object(m) => m.values().try_for_each(validate),
        Value::Array(xs) => xs.iter().try_for_each(validate),
        _ => Ok(()),
    }
}

/// Replaces placeholders in document order.
pub fn substitute(payload: &Value, rng: &mut ChaCha8Rng) -> Result<Value, SimError> {
    Ok(match payload {
        Value::Object(m) if m.contains_key(KEY) => draw(&spec(payload)?, rng)?,
        Value::Object(m) => {
            let mut out = serde_json::Map::new();
            for (k, v) in m {
                out.insert(k.clone(), substitute(v, rng)?);
            }
            Value::Object(out)
        }
        Value::Array(xs) => Value::Array(
            xs.iter()
                .map(|x| substitute(x, rng))
                .collect::<Result<_, _>>()?,
        ),
        other => other.clone(),
    })
}

fn spec(placeholder: &Value) -> Result<Spec, SimError> {
    let obj = placeholder.as_object().expect("placeholders are objects");
    if obj.len() != 1 {
        return Err(SimError::ScenarioInvalid(format!(
            "{KEY} placeholder must be the only key in its object"
        )));
    }
    let spec: Spec = serde_json::from_value(obj[KEY].clone())
        .map_err(|e| SimError::ScenarioInvalid(format!("{KEY}: {e}")))?;
    match spec {
        Spec::Normal { std, .. } if !(std.is_finite() && std >= 0.0) => Err(
            SimError::ScenarioInvalid(format!("{KEY}: std must be finite and >= 0, got {std}")),
        ),
        Spec::Uniform { low, high, .. } if !(low.is_finite() && high.is_finite() && low < high) => {
            Err(SimError::ScenarioInvalid(format!(
                "{KEY}: uniform needs low < high, got [{low}, {high})"
            )))
        }
        s => Ok(s),
    }
}

fn draw(spec: &Spec, rng: &mut ChaCha8Rng) -> Result<Value, SimError> {
    let invalid = |e: String| SimError::ScenarioInvalid(format!("{KEY}: {e}"));
    let (samples, n, round): (Vec<f64>, Option<usize>, Option<u32>) = match *spec {
        Spec::Normal {
            mean,
            std,
            n,
            round,
        } => {
            let d = Normal::new(mean, std).map_err(|e| invalid(e.to_string()))?;
            ((0..n.unwrap_or(1)).map(|_| d.sample(rng)).collect(), n, round)
        }
        Spec::Uniform { low, high, n, round } => {
            let d = Uniform::new(low, high).map_err(|e| invalid(e.to_string()))?;
            ((0..n.unwrap_or(1)).map(|_| d.sample(rng)).collect(), n, round)
        }
    };
    let rounded: Vec<Value> = samples
        .into_iter()
        .map(|x| match round {
            Some(p) => {
                let f = 10f64.powi(p as i32);
                (x * f).round() / f
            }
            None => x,
        })
        .map(Value::from)
        .collect();
    Ok(match n {
        Some(_) => Value::Array(rounded),
        None => rounded.into_iter().next().expect("one sample drawn"),
    })
}
