//! Check records and their two output formats.

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const TABLE_HEADER: &str = "check,anchor,lhs,rhs,gap,tol,pass";

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: String,
    pub anchor: String,
    pub digest: String,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub tol: f64,
    pub pass: bool,
    pub runtime_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub instance: String,
    pub instance_digest: String,
    pub command: String,
    pub seed: u64,
    pub tol: f64,
    pub checks: Vec<CheckRow>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// `|a - b|`, zero when both are the same infinity.
pub fn abs_gap(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs()
    }
}

fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn cell(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        let checks: Vec<Value> = self
            .checks
            .iter()
            .map(|c| {
                let mut v = json!({
                    "name": c.name,
                    "anchor": c.anchor,
                    "inputs_digest": c.digest,
                    "lhs": num(c.lhs),
                    "rhs": num(c.rhs),
                    "gap": num(c.gap),
                    "tol": num(c.tol),
                    "pass": c.pass,
                });
                if let Some(ms) = c.runtime_ms {
                    v["runtime_ms"] = json!(ms);
                }
                v
            })
            .collect();
        let passed = self.checks.iter().filter(|c| c.pass).count();
        let doc = json!({
            "instance": self.instance,
            "instance_digest": self.instance_digest,
            "command": self.command,
            "seed": self.seed,
            "tol": num(self.tol),
            "checks": checks,
            "summary": {
                "total": self.checks.len(),
                "passed": passed,
                "failed": self.checks.len() - passed,
            },
        });
        serde_json::to_string_pretty(&doc).expect("serialisable") + "\n"
    }

    pub fn to_table(&self) -> String {
        let mut out = String::from(TABLE_HEADER);
        out.push('\n');
        for c in &self.checks {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                csv_field(&c.name),
                csv_field(&c.anchor),
                cell(c.lhs),
                cell(c.rhs),
                cell(c.gap),
                cell(c.tol),
                c.pass
            ));
        }
        out
    }
}
