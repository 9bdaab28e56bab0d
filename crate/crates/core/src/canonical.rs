//! Canonical JSON: object keys sorted by byte order, two-space indentation,
//! trailing newline. Every persisted artifact (scene, plan, report, cassette)
//! goes through here so that equal values always produce equal bytes.

use serde::Serialize;
use serde_json::{Map, Value};

/// Recursively rebuilds `value` with sorted object keys.
pub fn sort_keys(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            let mut sorted = Map::new();
            for (k, v) in entries {
                sorted.insert(k, sort_keys(v));
            }
            Value::Object(sorted)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

pub fn to_canonical_value<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<Value> {
    serde_json::to_value(value).map(sort_keys)
}

/// Pretty canonical form, used for files on disk.
pub fn to_canonical_string<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let v = to_canonical_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

/// Compact canonical form, used for hashing.
pub fn to_canonical_compact<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let v = to_canonical_value(value)?;
    serde_json::to_string(&v)
}
