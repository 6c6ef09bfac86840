//! Deterministic JSON and CSV emission.
//!
//! Reports carry the schema tag [`SCHEMA`]. Floating-point numbers are
//! written in scientific notation with 17 significant digits, which round
//! trips every `f64`; object keys are sorted. Non-finite numbers become
//! `null`.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::ser::{SerializeSeq, Serializer};
use serde_json::Value;

pub const SCHEMA: &str = "pshlab-report/1";

pub fn ser_complex<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(2))?;
    seq.serialize_element(&z.re)?;
    seq.serialize_element(&z.im)?;
    seq.end()
}

pub fn ser_c2<S: Serializer>(v: &[Complex64; 2], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(2))?;
    seq.serialize_element(&[v[0].re, v[0].im])?;
    seq.serialize_element(&[v[1].re, v[1].im])?;
    seq.end()
}

/// Formats a float with 17 significant digits.
pub fn format_f64(x: f64) -> String {
    if !x.is_finite() {
        return "null".to_string();
    }
    format!("{x:.16e}")
}

/// Pretty-printed JSON with the crate's number formatting.
pub fn to_json_string(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn write_value(out: &mut String, v: &Value, level: usize) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&format_f64(n.as_f64().unwrap_or(f64::NAN)));
            } else {
                let _ = write!(out, "{n}");
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            // short arrays of scalars stay on one line
            if items.iter().all(|i| !i.is_array() && !i.is_object()) && items.len() <= 8 {
                out.push('[');
                for (k, i) in items.iter().enumerate() {
                    if k > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, i, level);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (k, i) in items.iter().enumerate() {
                indent(out, level + 1);
                write_value(out, i, level + 1);
                if k + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            indent(out, level);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            for (k, key) in keys.iter().enumerate() {
                indent(out, level + 1);
                out.push_str(&Value::String((*key).clone()).to_string());
                out.push_str(": ");
                write_value(out, &map[*key], level + 1);
                if k + 1 < keys.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            indent(out, level);
            out.push('}');
        }
    }
}

/// Wraps a payload in the versioned envelope.
pub fn envelope(command: &str, payload: Value) -> Value {
    serde_json::json!({
        "schema": SCHEMA,
        "command": command,
        "result": payload,
    })
}

/// CSV text from a header and rows of floats.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|x| format_f64(*x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            let s = format_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(format_f64(f64::NAN), "null");
    }

    #[test]
    fn output_parses_and_is_sorted() {
        let v = json!({"b": 1.5, "a": [1, 2.0, "x"], "c": {"z": null, "y": true}});
        let s = to_json_string(&v);
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["b"], json!(1.5));
        assert!(s.find("\"a\"").unwrap() < s.find("\"b\"").unwrap());
    }
}
