//! Structured results: every asserted bound keeps both sides and the margin.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// Positive when the assertion holds with room to spare.
    pub margin: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub context: String,
}

impl Assertion {
    /// `lhs <= rhs`.
    pub fn le(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            margin: rhs - lhs,
            pass: lhs <= rhs,
            context: String::new(),
        }
    }

    /// `lhs < rhs`.
    pub fn lt(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self {
            pass: lhs < rhs,
            ..Self::le(name, lhs, rhs)
        }
    }

    /// `lhs >= rhs`.
    pub fn ge(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            margin: lhs - rhs,
            pass: lhs >= rhs,
            context: String::new(),
        }
    }

    /// `lhs > rhs`.
    pub fn gt(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self {
            pass: lhs > rhs,
            ..Self::ge(name, lhs, rhs)
        }
    }

    pub fn with_context(mut self, context: impl Into<String>) -> Self {
        self.context = context.into();
        self
    }
}

/// One `(i, t)` cell of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub i: f64,
    pub t: f64,
    pub gh_lower: Option<f64>,
    pub gh_upper: Option<f64>,
    pub k_max: Option<f64>,
    /// Named scalar observations (circumference, deviations, …).
    pub values: BTreeMap<String, f64>,
    /// Named margins, emitted as `margin_<name>` CSV columns.
    pub margins: BTreeMap<String, f64>,
    pub pass: bool,
}

impl CellRecord {
    pub fn new(i: f64, t: f64) -> Self {
        Self {
            i,
            t,
            gh_lower: None,
            gh_upper: None,
            k_max: None,
            values: BTreeMap::new(),
            margins: BTreeMap::new(),
            pass: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub scenario: String,
    pub code_version: String,
    /// Wall-clock stamp; the only field allowed to differ between reruns.
    pub timestamp: String,
    pub config: serde_json::Value,
    pub grid_slack: f64,
    pub records: Vec<CellRecord>,
    pub assertions: Vec<Assertion>,
    /// Extra structured output (comparison rows, residual reports, …).
    pub notes: BTreeMap<String, serde_json::Value>,
    pub pass: bool,
}

impl Report {
    pub fn new(scenario: impl Into<String>, config: serde_json::Value, grid_slack: f64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            scenario: scenario.into(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: String::new(),
            config,
            grid_slack,
            records: Vec::new(),
            assertions: Vec::new(),
            notes: BTreeMap::new(),
            pass: true,
        }
    }

    pub fn assert(&mut self, a: Assertion) {
        self.pass &= a.pass;
        self.assertions.push(a);
    }

    pub fn extend(&mut self, items: impl IntoIterator<Item = Assertion>) {
        for a in items {
            self.assert(a);
        }
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("serializable note");
        self.notes.insert(key.to_string(), v);
    }

    pub fn failures(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions.iter().filter(|a| !a.pass)
    }

    /// CSV series: `scenario,i,t,gh_lower,gh_upper,K_max,margin_*…,pass`.
    pub fn series_csv(&self) -> String {
        let mut margin_keys: Vec<&String> = self.records.iter().flat_map(|r| r.margins.keys()).collect();
        margin_keys.sort();
        margin_keys.dedup();
        let mut out = String::from("scenario,i,t,gh_lower,gh_upper,K_max");
        for k in &margin_keys {
            out.push_str(",margin_");
            out.push_str(k);
        }
        out.push_str(",pass\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_default();
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{:.17e},{},{},{}",
                self.scenario,
                r.i,
                r.t,
                opt(r.gh_lower),
                opt(r.gh_upper),
                opt(r.k_max)
            ));
            for k in &margin_keys {
                out.push(',');
                out.push_str(&opt(r.margins.get(*k).copied()));
            }
            out.push_str(if r.pass { ",true\n" } else { ",false\n" });
        }
        out
    }
}
