//! Report persistence: a JSON document per experiment, with optional CSV
//! curve emission. Reports are byte-identical across runs with the same
//! config and seed; wall-clock timings are only included on request.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

/// One bound verification: a measured `lhs` against its budget `rhs`.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub name: String,
    /// Which inequality this record instantiates.
    pub bound: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl CheckRecord {
    pub fn bounded(name: impl Into<String>, bound: &str, x: Option<f64>, lhs: f64, rhs: f64) -> Self {
        Self {
            name: name.into(),
            bound: bound.into(),
            x,
            lhs,
            rhs,
            pass: lhs <= rhs,
        }
    }

    pub fn info(name: impl Into<String>, bound: &str, value: f64) -> Self {
        Self {
            name: name.into(),
            bound: bound.into(),
            x: None,
            lhs: value,
            rhs: f64::INFINITY,
            pass: true,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub task: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub records: Vec<CheckRecord>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, f64>>,
}

impl ExperimentReport {
    pub fn new(
        task: &str,
        seed: u64,
        config: BTreeMap<String, String>,
        records: Vec<CheckRecord>,
    ) -> Self {
        let pass = records.iter().all(|r| r.pass);
        Self {
            schema_version: 1,
            tool: "qac-lab",
            tool_version: env!("CARGO_PKG_VERSION"),
            task: task.to_string(),
            seed,
            config,
            records,
            pass,
        timings_ms: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,x,lhs,rhs,pass\n");
        for r in &self.records {
            let x = r.x.map(|v| format!("{v}")).unwrap_or_default();
            out.push_str(&format!("{},{},{},{},{}\n", r.name, x, r.lhs, r.rhs, r.pass));
        }
        out
    }

    pub fn first_failure(&self) -> Option<&CheckRecord> {
        self.records.iter().find(|r| !r.pass)
    }

    pub fn write(&self, path: &Path, csv: bool) -> anyhow::Result<()> {
        std::fs::write(path, self.to_json())?;
        if csv {
            let curve = path.with_extension("csv");
            std::fs::write(curve, self.to_csv())?;
        }
        Ok(())
    }
}
