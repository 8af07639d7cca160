//! JSON and CSV emission with every real printed to 17 significant digits.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::Formatter;
use serde_json::Value;

pub fn format_real(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

/// Compact JSON whose floats keep 17 significant digits.
struct Sig17;

impl Formatter for Sig17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            writer.write_all(format_real(value).as_bytes())
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> anyhow::Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf)?)
}

fn flatten_into(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                flatten_into(&key(k), child, out);
            }
        }
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                flatten_into(&key(&i.to_string()), child, out);
            }
        }
        Value::Null => out.push((prefix.to_string(), String::new())),
        Value::Bool(b) => out.push((prefix.to_string(), b.to_string())),
        Value::Number(n) => {
            let s = if n.is_f64() {
                format_real(n.as_f64().unwrap_or(f64::NAN))
            } else {
                n.to_string()
            };
            out.push((prefix.to_string(), s));
        }
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
    }
}

/// One CSV row per element; nested fields become dotted column names.
pub fn to_csv(rows: &[Value], manifest: &Value) -> anyhow::Result<String> {
    let flat: Vec<Vec<(String, String)>> = rows
        .iter()
        .map(|r| {
            let mut out = Vec::new();
            flatten_into("", r, &mut out);
            out
        })
        .collect();
    let mut header: Vec<String> = Vec::new();
    for row in &flat {
        for (k, _) in row {
            if !header.contains(k) {
                header.push(k.clone());
            }
        }
    }
    let mut text = format!("# manifest: {}\n", to_json(manifest)?);
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(&header)?;
    for row in &flat {
        writer.write_record(
            header
                .iter()
                .map(|h| row.iter().find(|(k, _)| k == h).map(|(_, v)| v.as_str()).unwrap_or("")),
        )?;
    }
    text.push_str(&String::from_utf8(writer.into_inner()?)?);
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip_bit_exactly() {
        for v in [0.1f64, 1.0 / 3.0, 0.368_064_207_168_497_07, 1e-300, -2.5e10, 0.0] {
            let s = to_json(&v).unwrap();
            let back: f64 = serde_json::from_str(&s).unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(to_json(&0.1).unwrap(), "1.0000000000000001e-1");
        assert_eq!(to_json(&3u64).unwrap(), "3");
    }

    #[test]
    fn csv_flattens_nested_rows() {
        let rows = vec![
            serde_json::json!({"n": 1, "bound": 0.5, "q": [0.25, 0.75]}),
            serde_json::json!({"n": 2, "bound": "inf", "q": [0.5, 0.5]}),
        ];
        let text = to_csv(&rows, &serde_json::json!({})).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "n,bound,q.0,q.1");
        assert_eq!(lines[3], "2,inf,5.0000000000000000e-1,5.0000000000000000e-1");
    }
}
