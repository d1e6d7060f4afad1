//! Pretty JSON that keeps short numeric arrays on one line.
//!
//! Arrays nested at most two levels deep with numeric leaves, such as a
//! `[re, im]` pair or a matrix row of pairs, are written inline, so each
//! matrix row occupies one line.

use serde::Serialize;
use serde_json::Value;

fn depth(v: &Value) -> Option<usize> {
    match v {
        Value::Object(_) | Value::String(_) => None,
        Value::Array(items) => items
            .iter()
            .try_fold(0, |acc, item| depth(item).map(|d| acc.max(d)))
            .map(|d| d + 1),
        _ => Some(0),
    }
}

fn inline(v: &Value) -> String {
    match v {
        Value::Array(items) => format!("[{}]", items.iter().map(inline).collect::<Vec<_>>().join(", ")),
        _ => serde_json::to_string(v).expect("values serialize"),
    }
}

fn write(v: &Value, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent + 1);
    match v {
        Value::Array(items) if !items.is_empty() && depth(v).is_none_or(|d| d > 2) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&pad);
                write(item, indent + 1, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&"  ".repeat(indent));
            out.push(']');
        }
        Value::Object(map) if !map.is_empty() => {
            out.push_str("{\n");
            for (i, (key, item)) in map.iter().enumerate() {
                out.push_str(&pad);
                out.push_str(&serde_json::to_string(key).expect("keys serialize"));
                out.push_str(": ");
                write(item, indent + 1, out);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            out.push_str(&"  ".repeat(indent));
            out.push('}');
        }
        Value::Array(_) => out.push_str(&inline(v)),
        _ => out.push_str(&serde_json::to_string(v).expect("values serialize")),
    }
}

/// Serialize `value` with two-space indentation and a trailing newline.
pub fn to_pretty<T: Serialize>(value: &T) -> String {
    let value = serde_json::to_value(value).expect("value serializes");
    let mut out = String::new();
    write(&value, 0, &mut out);
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn matrix_rows_stay_on_one_line() {
        let v = json!({"C": [[[1.0, 0.0], [0.5, -0.25]], [[0.0, 0.0], [1.0, 0.0]]], "s": "x"});
        let text = to_pretty(&v);
        assert!(text.contains("    [[1.0, 0.0], [0.5, -0.25]],\n"));
        assert_eq!(serde_json::from_str::<Value>(&text).unwrap(), v);
    }
}
