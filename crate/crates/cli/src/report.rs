//! Command reports, printed as aligned text or JSON.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{Map, Value};

/// What a failed verdict means for the exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Validation,
    Theorem,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub name: String,
    pub stage: Stage,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_sha256: Option<String>,
    pub parameters: Map<String, Value>,
    pub results: Map<String, Value>,
    pub verdicts: Vec<Verdict>,
    pub status: &'static str,
    pub exit_code: i32,
}

impl Report {
    pub fn new(command: Vec<String>, input_sha256: Option<String>) -> Self {
        Report {
            command,
            input_sha256,
            parameters: Map::new(),
            results: Map::new(),
            verdicts: Vec::new(),
            status: "PASS",
            exit_code: 0,
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        self.parameters.insert(key.to_string(), to_value(value));
    }

    pub fn result(&mut self, key: &str, value: impl Serialize) {
        self.results.insert(key.to_string(), to_value(value));
    }

    pub fn verdict(&mut self, name: &str, stage: Stage, pass: bool, detail: Option<String>) {
        self.verdicts.push(Verdict { name: name.to_string(), stage, pass, detail });
        let failed = |s| self.verdicts.iter().any(|v| !v.pass && v.stage == s);
        self.exit_code = if failed(Stage::Validation) {
            2
        } else if failed(Stage::Theorem) {
            3
        } else {
            0
        };
        self.status = if self.exit_code == 0 { "PASS" } else { "FAIL" };
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("reports serialize");
        text.push('\n');
        text
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut rows = vec![("command".to_string(), self.command.join(" "))];
        if let Some(digest) = &self.input_sha256 {
            rows.push(("input sha256".to_string(), digest.clone()));
        }
        rows.extend(self.parameters.iter().map(|(k, v)| (k.clone(), short(v))));
        rows.extend(self.results.iter().map(|(k, v)| (k.clone(), short(v))));
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in rows {
            writeln!(out, "{k:<width$}  {v}").unwrap();
        }
        for v in &self.verdicts {
            let mark = if v.pass { "PASS" } else { "FAIL" };
            match &v.detail {
                Some(d) => writeln!(out, "{mark}  {}: {d}", v.name).unwrap(),
                None => writeln!(out, "{mark}  {}", v.name).unwrap(),
            }
        }
        writeln!(out, "status  {}", self.status).unwrap();
        out
    }
}

fn to_value(value: impl Serialize) -> Value {
    serde_json::to_value(value).expect("report values serialize")
}

/// Scalars in full, short arrays inline, anything larger summarised.
fn short(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Array(items) if items.len() > 8 => format!("[{} entries]", items.len()),
        Value::Object(map) if map.len() > 8 => format!("{{{} fields}}", map.len()),
        other => other.to_string(),
    }
}
