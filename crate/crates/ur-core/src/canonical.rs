//! Canonical JSON: sorted keys, no insignificant whitespace, shortest
//! round-trip float formatting.

use serde::Serialize;
use serde_json::{Map, Value};

pub fn to_value<T: Serialize + ?Sized>(value: &T) -> Value {
    sort(serde_json::to_value(value).expect("domain types serialize to JSON"))
}

pub fn to_string<T: Serialize + ?Sized>(value: &T) -> String {
    serde_json::to_string(&to_value(value)).expect("JSON values serialize")
}

fn sort(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            let mut out = Map::new();
            for (k, v) in entries {
                out.insert(k, sort(v));
            }
            Value::Object(out)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort).collect()),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_sorted_and_compact() {
        let v = json!({"b": 1, "a": {"d": [1.5, 0.1], "c": null}});
        assert_eq!(to_string(&v), r#"{"a":{"c":null,"d":[1.5,0.1]},"b":1}"#);
    }

    #[test]
    fn floats_round_trip() {
        let x: f64 = 0.1 + 0.2;
        let s = to_string(&x);
        assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
    }
}
