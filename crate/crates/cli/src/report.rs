use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use num_complex::Complex64 as C64;
use photon_tn::format::basis_label;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

/// JSON report printed by every command.
pub struct Report {
    command: Vec<String>,
    inputs: Vec<Value>,
    payload: Map<String, Value>,
    checks: Vec<Value>,
    pass: bool,
    started: Instant,
}

impl Report {
    pub fn new(command: Vec<String>) -> Self {
        Report {
            command,
            inputs: Vec::new(),
            payload: Map::new(),
            checks: Vec::new(),
            pass: true,
            started: Instant::now(),
        }
    }

    /// Reads an input file, recording its path and SHA-256 digest.
    pub fn read_input(&mut self, path: &Path) -> Result<String> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.push(json!({
            "path": path.display().to_string(),
            "sha256": hex::encode(Sha256::digest(&bytes)),
        }));
        String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))
    }

    pub fn set(&mut self, key: &str, value: Value) {
        self.payload.insert(key.to_string(), value);
    }

    /// Records `value ≤ tolerance`.
    pub fn check_max(&mut self, name: &str, value: f64, tolerance: f64) -> bool {
        let pass = value <= tolerance;
        self.checks
            .push(json!({ "name": name, "value": value, "tolerance": tolerance, "pass": pass }));
        self.pass &= pass;
        pass
    }

    pub fn check_flag(&mut self, name: &str, pass: bool) -> bool {
        self.checks.push(json!({ "name": name, "pass": pass }));
        self.pass &= pass;
        pass
    }

    pub fn pass(&self) -> bool {
        self.pass
    }

    pub fn finish(self) -> Value {
        json!({
            "command": self.command,
            "inputs": self.inputs,
            "payload": self.payload,
            "checks": self.checks,
            "pass": self.pass,
            "duration_seconds": self.started.elapsed().as_secs_f64(),
        })
    }
}

/// `[{ "basis": "i_n…i_1", "amplitude": [re, im] }, …]`
pub fn amplitudes(state: &[C64], dims: &[usize]) -> Value {
    Value::Array(
        state
            .iter()
            .enumerate()
            .map(|(k, z)| json!({ "basis": basis_label(k, dims), "amplitude": [z.re, z.im] }))
            .collect(),
    )
}
