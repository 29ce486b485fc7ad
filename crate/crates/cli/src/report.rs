//! The report model and its two renderings.
//!
//! JSON is the single machine format. The human format is produced by
//! walking the same JSON value, so the two can never disagree.

use std::fmt::Write as _;

use causal_core::study::parse_json_bytes;
use causal_core::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::args::Format;

pub const SCHEMA_VERSION: &str = "cl-report/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema_version: String,
    pub command: String,
    /// `sha256:` digest of the primary input bytes.
    pub inputs_digest: String,
    /// Effective configuration, defaults included.
    pub config: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effect: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confounding: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthesis: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checklist: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub legal: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<Value>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn new(command: &str, input: &[u8], config: Value) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            command: command.to_string(),
            inputs_digest: digest(input),
            config,
            effect: None,
            confounding: None,
            synthesis: None,
            checklist: None,
            legal: None,
            simulation: None,
            warnings: Vec::new(),
        }
    }

    /// Adds a warning once, keeping first-seen order.
    pub fn warn(&mut self, w: impl Into<String>) {
        let w = w.into();
        if !self.warnings.contains(&w) {
            self.warnings.push(w);
        }
    }
}

pub fn digest(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

pub fn parse_report(bytes: &[u8]) -> Result<Report> {
    let r: Report = parse_json_bytes(bytes)?;
    if r.schema_version != SCHEMA_VERSION {
        return Err(Error::Schema {
            path: "schema_version".into(),
            message: format!("expected {SCHEMA_VERSION}, found {}", r.schema_version),
        });
    }
    Ok(r)
}

pub fn render_report(r: &Report, format: Format) -> Vec<u8> {
    // Map keys come out sorted: serde_json's default map is ordered.
    let value = serde_json::to_value(r).expect("report serializes");
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&value).expect("value serializes");
            s.push('\n');
            s.into_bytes()
        }
        Format::Human => render_human(&value).into_bytes(),
    }
}

const SECTIONS: [&str; 6] = ["effect", "confounding", "synthesis", "checklist", "legal", "simulation"];

fn render_human(v: &Value) -> String {
    let field = |k: &str| v.get(k).and_then(Value::as_str).unwrap_or_default();
    let mut out = format!(
        "causal report {}\ncommand: {}\ninputs: {}\n",
        field("schema_version"),
        field("command"),
        field("inputs_digest")
    );
    if let Some(w) = v.get("warnings").and_then(Value::as_array).filter(|w| !w.is_empty()) {
        out.push_str("\nWARNINGS\n");
        for item in w {
            let _ = writeln!(out, "  ! {}", item.as_str().unwrap_or_default());
        }
    }
    for name in SECTIONS.iter().chain(&["config"]) {
        if let Some(section) = v.get(*name) {
            let _ = writeln!(out, "\n{}", name.to_uppercase());
            write_value(&mut out, section, 1);
        }
    }
    out
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some("n/a".into()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) if s.is_empty() => Some("(empty)".into()),
        Value::String(s) => Some(s.clone()),
        Value::Array(a) if a.is_empty() => Some("(none)".into()),
        Value::Array(a) if a.iter().all(|x| x.is_number()) => {
            Some(format!("[{}]", a.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")))
        }
        Value::Object(m) if m.is_empty() => Some("(none)".into()),
        _ => None,
    }
}

fn write_value(out: &mut String, v: &Value, depth: usize) {
    let pad = "  ".repeat(depth);
    match v {
        Value::Object(map) => {
            for (k, item) in map {
                match scalar(item) {
                    Some(s) => {
                        let _ = writeln!(out, "{pad}{k}: {s}");
                    }
                    None => {
                        let _ = writeln!(out, "{pad}{k}:");
                        write_value(out, item, depth + 1);
                    }
                }
            }
        }
        Value::Array(items) => {
            for item in items {
                match scalar(item) {
                    Some(s) => {
                        let _ = writeln!(out, "{pad}- {s}");
                    }
                    None => {
                        let _ = writeln!(out, "{pad}-");
                        write_value(out, item, depth + 1);
                    }
                }
            }
        }
        other => {
            let _ = writeln!(out, "{pad}{}", scalar(other).unwrap_or_default());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn sample() -> Report {
        let mut r = Report::new("measure", b"{}", json!({"alpha": 0.05}));
        r.effect = Some(json!({"zeta": 1, "alpha": {"rr": 5.0, "ci": [1.9, 13.0]}, "list": [{"k": "v"}]}));
        r.warn("w1");
        r.warn("w1");
        r
    }

    #[test]
    fn json_is_sorted_and_stable() {
        let r = sample();
        let a = render_report(&r, Format::Json);
        assert_eq!(a, render_report(&r, Format::Json));
        let text = String::from_utf8(a).unwrap();
        assert!(text.find("\"alpha\"").unwrap() < text.find("\"zeta\"").unwrap());
        assert_eq!(r.warnings, ["w1"]);
    }

    #[test]
    fn json_round_trip_is_a_fixed_point() {
        let bytes = render_report(&sample(), Format::Json);
        let parsed = parse_report(&bytes).unwrap();
        assert_eq!(render_report(&parsed, Format::Json), bytes);
    }

    #[test]
    fn digest_is_content_hash() {
        assert_eq!(digest(b"abc"), "sha256:ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn human_rendering() {
        let text = String::from_utf8(render_report(&sample(), Format::Human)).unwrap();
        assert!(text.starts_with("causal report cl-report/1\ncommand: measure\n"));
        assert!(text.contains("  ! w1\n"));
        assert!(text.contains("    ci: [1.9, 13.0]\n"));
        assert!(text.contains("  list:\n    -\n      k: v\n"));
    }

    #[test]
    fn wrong_schema_is_rejected() {
        let mut v = serde_json::to_value(sample()).unwrap();
        v["schema_version"] = json!("cl-report/0");
        assert!(matches!(parse_report(v.to_string().as_bytes()), Err(Error::Schema { .. })));
    }
}
