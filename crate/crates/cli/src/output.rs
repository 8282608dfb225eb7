//! CSV and JSON artifacts.

use serde_json::{json, Map, Value};

use crate::config::ExperimentConfig;

pub const CSV_HEADER: &str = "# percwalk-csv v1";
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits; non-finite values become `null`.
pub fn round(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let r: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x);
    json!(r)
}

/// Rounds every float in a JSON tree.
pub fn round_tree(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => round(n.as_f64().unwrap_or(f64::NAN)),
        Value::Array(xs) => Value::Array(xs.into_iter().map(round_tree).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, round_tree(v))).collect()),
        other => other,
    }
}

/// Headline numbers of one experiment plus its detail tables.
#[derive(Clone, Debug)]
pub struct Report {
    pub family: String,
    pub p: f64,
    pub n: Option<usize>,
    pub estimator: String,
    pub value: f64,
    pub se: f64,
    pub ci: (f64, f64),
    pub truncation_rate: f64,
    pub details: Map<String, Value>,
    /// Rows for CSV output; every row has the same columns.
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn new(family: String, p: f64, estimator: impl Into<String>) -> Self {
        Self {
            family,
            p,
            n: None,
            estimator: estimator.into(),
            value: f64::NAN,
            se: f64::NAN,
            ci: (f64::NAN, f64::NAN),
            truncation_rate: 0.0,
            details: Map::new(),
            columns: Vec::new(),
            rows: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn detail(&mut self, key: &str, v: Value) {
        self.details.insert(key.into(), v);
    }

    pub fn headline(&mut self, value: f64, se: f64, ci: (f64, f64)) {
        self.value = value;
        self.se = se;
        self.ci = ci;
    }

    pub fn to_json(&self, cfg: &ExperimentConfig) -> String {
        let config: Map<String, Value> =
            crate::config::KEYS.iter().map(|k| (k.to_string(), json!(cfg.get(k).unwrap_or_default()))).collect();
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Object(self.columns.iter().cloned().zip(r.iter().cloned()).collect()))
            .collect();
        let v = json!({
            "experiment": cfg.experiment.name(),
            "family": self.family,
            "p": self.p,
            "n": self.n,
            "estimator": self.estimator,
            "value": self.value,
            "se": self.se,
            "ci": [self.ci.0, self.ci.1],
            "truncation_rate": self.truncation_rate,
            "seed": cfg.seed,
            "details": self.details,
            "rows": rows,
            "warnings": self.warnings,
            "config": config,
            "version": crate::VERSION,
        });
        let mut s = serde_json::to_string_pretty(&round_tree(v)).expect("JSON values serialize");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        csv(&self.columns, &self.rows)
    }
}

fn cell(v: &Value) -> String {
    match round_tree(v.clone()) {
        Value::Null => "NA".into(),
        Value::String(s) => s,
        other => other.to_string(),
    }
}

/// Versioned CSV with a header comment.
pub fn csv(columns: &[String], rows: &[Vec<Value>]) -> String {
    let mut s = String::new();
    s.push_str(CSV_HEADER);
    s.push('\n');
    s.push_str(&columns.join(","));
    s.push('\n');
    for r in rows {
        s.push_str(&r.iter().map(cell).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    s
}
