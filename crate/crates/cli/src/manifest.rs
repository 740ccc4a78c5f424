//! Canonical JSON: object keys sorted, floats as `{:.16e}`, no whitespace.
//! Identical inputs give identical bytes.

use serde::Serialize;
use serde_json::Value;
use viscobeam::dimred::ScaledGeometry;
use viscobeam::flow::FlowTrajectory;
use viscobeam::QuadFormSummary;

use crate::commands::GammaSummary;
use crate::config::RunConfig;

pub const ARTIFACT_VERSION: u32 = 1;

pub fn canonical_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(v, &mut out);
    out
}

fn write_value(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                out.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(a) => {
            out.push('[');
            for (k, x) in a.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                write_value(x, out);
            }
            out.push(']');
        }
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            out.push('{');
            for (k, key) in keys.into_iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(key.clone()).to_string());
                out.push(':');
                write_value(&m[key], out);
            }
            out.push('}');
        }
    }
}

pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        // JSON has no inf/nan; keep them readable as strings
        format!("\"{x}\"")
    }
}

pub fn to_canonical<T: Serialize>(v: &T) -> String {
    canonical_json(&serde_json::to_value(v).expect("value serializes"))
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowSummary {
    pub steps: usize,
    pub t_final: f64,
    pub phi_initial: f64,
    pub phi_final: f64,
    pub edb_deficit: f64,
    pub max_step_decrease: f64,
    pub max_newton_iters: usize,
    pub snapshots: Vec<String>,
}

impl FlowSummary {
    pub fn new(traj: &FlowTrajectory, phi_initial: f64, snapshots: Vec<String>) -> Self {
        let led = &traj.ledger;
        Self {
            steps: led.len().saturating_sub(1),
            t_final: traj.times.last().copied().unwrap_or(0.0),
            phi_initial,
            phi_final: led.last().map_or(phi_initial, |r| r.phi),
            edb_deficit: viscobeam::flow::edb_deficit(traj),
            max_step_decrease: led.iter().map(|r| r.step_decrease).fold(f64::NEG_INFINITY, f64::max),
            max_newton_iters: led.iter().map(|r| r.newton_iters).max().unwrap_or(0),
            snapshots,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest<'a> {
    pub artifact_version: u32,
    pub command: &'a str,
    pub config: &'a RunConfig,
    pub config_hash: String,
    pub quadforms: QuadFormSummary,
    pub hypothesis_h: HFlags,
    pub schedule: Option<Vec<ScaledGeometry>>,
    pub flow: Option<FlowSummary>,
    pub gamma: Option<GammaSummary>,
    pub outputs: Vec<String>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct HFlags {
    pub w: bool,
    pub r: bool,
}

impl Manifest<'_> {
    pub fn to_json(&self) -> String {
        let mut s = to_canonical(self);
        s.push('\n');
        s
    }
}

/// First line of every CSV artifact.
pub fn hash_line(hash: &str) -> String {
    format!("# config_hash={hash}\n")
}
