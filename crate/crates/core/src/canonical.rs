//! Canonical JSON: sorted keys, two-space indentation, floats rounded to nine
//! significant digits and printed in their shortest round-trip form.
//!
//! Serializing, parsing and serializing again yields identical bytes.

use std::fmt::Write as _;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

/// Rounds `x` to nine significant digits and formats it. `-0` becomes `0`.
pub fn format_f64(x: f64) -> Result<String> {
    if !x.is_finite() {
        return Err(Error::invalid(format!("cannot encode non-finite number {x}")));
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    Ok(format!("{rounded}"))
}

pub fn to_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let value = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&value, 0, &mut out)?;
    out.push('\n');
    Ok(out)
}

/// Single-line canonical form, used for JSON-lines output.
pub fn to_line<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let value = serde_json::to_value(value)?;
    let mut out = String::new();
    write_compact(&value, &mut out)?;
    Ok(out)
}

pub fn from_str<T: DeserializeOwned>(s: &str) -> Result<T> {
    Ok(serde_json::from_str(s)?)
}

fn write_number(n: &serde_json::Number, out: &mut String) -> Result<()> {
    if n.is_f64() {
        out.push_str(&format_f64(n.as_f64().unwrap_or(f64::NAN))?);
    } else {
        write!(out, "{n}").unwrap();
    }
    Ok(())
}

fn write_string(s: &str, out: &mut String) {
    out.push_str(&serde_json::to_string(s).expect("string serializes"));
}

fn sorted_entries(map: &serde_json::Map<String, Value>) -> Vec<(&String, &Value)> {
    let mut entries: Vec<_> = map.iter().collect();
    entries.sort_by(|a, b| a.0.cmp(b.0));
    entries
}

fn write_value(value: &Value, indent: usize, out: &mut String) -> Result<()> {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => write_number(n, out)?,
        Value::String(s) => write_string(s, out),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
            } else if items.iter().all(|v| matches!(v, Value::Number(_))) {
                // Numeric vectors stay on one line.
                write_compact(value, out)?;
            } else {
                out.push_str("[\n");
                for (i, item) in items.iter().enumerate() {
                    pad(indent + 1, out);
                    write_value(item, indent + 1, out)?;
                    if i + 1 < items.len() {
                        out.push(',');
                    }
                    out.push('\n');
                }
                pad(indent, out);
                out.push(']');
            }
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return Ok(());
            }
            out.push_str("{\n");
            let entries = sorted_entries(map);
            for (i, (k, v)) in entries.iter().enumerate() {
                pad(indent + 1, out);
                write_string(k, out);
                out.push_str(": ");
                write_value(v, indent + 1, out)?;
                if i + 1 < entries.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            pad(indent, out);
            out.push('}');
        }
    }
    Ok(())
}

fn write_compact(value: &Value, out: &mut String) -> Result<()> {
    match value {
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_compact(item, out)?;
            }
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            for (i, (k, v)) in sorted_entries(map).into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_string(k, out);
                out.push(':');
                write_compact(v, out)?;
            }
            out.push('}');
        }
        other => write_value(other, 0, out)?,
    }
    Ok(())
}

fn pad(indent: usize, out: &mut String) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting() {
        assert_eq!(format_f64(0.1).unwrap(), "0.1");
        assert_eq!(format_f64(1.0).unwrap(), "1");
        assert_eq!(format_f64(-0.0).unwrap(), "0");
        assert_eq!(format_f64(0.123_456_789_123).unwrap(), "0.123456789");
        assert_eq!(format_f64(1.0 / 3.0).unwrap(), "0.333333333");
        assert!(format_f64(f64::NAN).is_err());
    }

    #[test]
    fn keys_sorted_and_stable() {
        let v = serde_json::json!({"b": 1, "a": [0.5, 2.25], "c": {"z": true, "y": null}});
        let s = to_string(&v).unwrap();
        assert!(s.find("\"a\"").unwrap() < s.find("\"b\"").unwrap());
        let back: Value = from_str(&s).unwrap();
        assert_eq!(to_string(&back).unwrap(), s);
        assert_eq!(
            to_line(&v).unwrap(),
            r#"{"a":[0.5,2.25],"b":1,"c":{"y":null,"z":true}}"#
        );
    }
}
