//! Report envelope and emission.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const TOOL: &str = "polyharm";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// What a command produced, before it is wrapped in a [`Report`].
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub payload: Value,
    pub csv: Option<String>,
    /// Plain answer printed by default, e.g. a single number.
    pub text: Option<String>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub config_hash: String,
    pub passed: bool,
    pub payload: Value,
    /// SHA-256 over everything above; `timings` are not covered.
    pub determinism_hash: String,
    pub timings: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct Hashed<'a> {
    tool: &'a str,
    version: &'a str,
    command: &'a str,
    config: &'a RunConfig,
    config_hash: &'a str,
    passed: bool,
    payload: &'a Value,
}

impl Report {
    pub fn new(command: &str, config: &RunConfig, outcome: &Outcome, timings: BTreeMap<String, f64>) -> Self {
        let mut report = Report {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            config: config.clone(),
            config_hash: config.hash(),
            passed: outcome.passed,
            payload: outcome.payload.clone(),
            determinism_hash: String::new(),
            timings,
        };
        report.determinism_hash = report.compute_hash();
        report
    }

    pub fn compute_hash(&self) -> String {
        let mut config = self.config.clone();
        config.out = None;
        config.format = None;
        config.jobs = None;
        let h = Hashed {
            tool: &self.tool,
            version: &self.version,
            command: &self.command,
            config: &config,
            config_hash: &self.config_hash,
            passed: self.passed,
            payload: &self.payload,
        };
        hex::encode(Sha256::digest(serde_json::to_vec(&h).expect("report serializes")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Writes `<command>.json` and, when present, `<command>.csv` into `dir`.
    pub fn write(&self, dir: &Path, csv: Option<&str>) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{}.json", self.command)), self.to_json())?;
        if let Some(csv) = csv {
            std::fs::write(dir.join(format!("{}.csv", self.command)), csv)?;
        }
        Ok(())
    }
}

/// Builds CSV text from a header and rows of already formatted cells.
pub fn csv_text<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}
