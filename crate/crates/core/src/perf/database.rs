//! Design database: one JSON object per line, each a design point with its
//! measured (or surrogate) latency and BRAM usage.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::space::{DesignConfig, DesignContext};
use super::surrogate::surrogate_estimate;
use crate::error::{from_json_str, Error, Result};

/// Provenance tag for rows produced by the analytic surrogate.
pub const SURROGATE_PROVENANCE: &str = "surrogate";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignRecord {
    pub config: DesignConfig,
    pub latency_cycles: u64,
    pub bram_18k: u64,
    /// Where the numbers came from, e.g. `surrogate` or a tool name.
    pub provenance: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DesignDatabase {
    pub records: Vec<DesignRecord>,
}

impl DesignDatabase {
    pub fn new(records: Vec<DesignRecord>) -> Result<Self> {
        let db = Self { records };
        db.validate()?;
        Ok(db)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Rejects duplicate configs and mixed provenance.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for (i, r) in self.records.iter().enumerate() {
            if !seen.insert(r.config) {
                return Err(Error::Model(format!(
                    "record {}: duplicate design {:?}",
                    i + 1,
                    r.config
                )));
            }
            if r.provenance != self.records[0].provenance {
                return Err(Error::Model(format!(
                    "record {}: provenance `{}` differs from `{}`",
                    i + 1,
                    r.provenance,
                    self.records[0].provenance
                )));
            }
        }
        Ok(())
    }

    pub fn provenance(&self) -> Option<&str> {
        self.records.first().map(|r| r.provenance.as_str())
    }

    pub fn parse_jsonl(text: &str) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: DesignRecord = from_json_str("design record", line).map_err(|e| match e {
                Error::Parse { path, message, .. } => Error::Parse {
                    context: "design database",
                    path,
                    line: i + 1,
                    column: 0,
                    message,
                },
                other => other,
            })?;
            records.push(rec);
        }
        Self::new(records)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_jsonl(&text)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_jsonl().as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Labels every config with the analytic surrogate.
pub fn build_surrogate_database(configs: &[DesignConfig], ctx: &DesignContext) -> Result<DesignDatabase> {
    let records = configs
        .iter()
        .map(|c| {
            let e = surrogate_estimate(c, ctx);
            DesignRecord {
                config: *c,
                latency_cycles: e.latency_cycles,
                bram_18k: e.bram_18k,
                provenance: SURROGATE_PROVENANCE.into(),
            }
        })
        .collect();
    DesignDatabase::new(records)
}
