use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use towtrack::simkit::ScenarioConfig;

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    /// Scenario parameters shared by every cell of the run.
    pub config: Value,
    /// `filter/case/mode` cells covered by this output directory.
    pub cells: Vec<String>,
    pub started_at: String,
    pub finished_at: String,
    /// Output file names, relative to the manifest's directory.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, cfg: &ScenarioConfig) -> Self {
        Self {
            tool: "towtrack".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: config_hash(cfg),
            seed: cfg.seed,
            config: shared_config(cfg),
            cells: Vec::new(),
            started_at: now(),
            finished_at: String::new(),
            outputs: Vec::new(),
        }
    }

    pub fn finish(&mut self, dir: &Path) -> Result<(), CliError> {
        self.finished_at = now();
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Config as JSON without the cell selectors, which the CLI sweeps.
fn shared_config(cfg: &ScenarioConfig) -> Value {
    let mut v = serde_json::to_value(cfg).expect("config serialises to JSON");
    if let Value::Object(map) = &mut v {
        for key in ["filter", "case", "mode"] {
            map.remove(key);
        }
    }
    v
}

/// SHA-256 of the canonical JSON of the shared config.
pub fn config_hash(cfg: &ScenarioConfig) -> String {
    let mut canon = String::new();
    canonical_json(&shared_config(cfg), &mut canon);
    let digest = Sha256::digest(canon.as_bytes());
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Compact JSON with object keys in byte order at every level.
pub fn canonical_json(v: &Value, out: &mut String) {
    match v {
        Value::Object(map) => {
            let sorted: BTreeMap<&String, &Value> = map.iter().collect();
            out.push('{');
            for (i, (k, v)) in sorted.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                canonical_json(v, out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                canonical_json(item, out);
            }
            out.push(']');
        }
        other => out.push_str(&other.to_string()),
    }
}
