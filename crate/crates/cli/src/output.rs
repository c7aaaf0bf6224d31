use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::CliError;

/// A tidy table plus a JSON summary, written as `<name>.csv` and `<name>.json`.
pub struct Artifact {
    pub name: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub summary: serde_json::Value,
    pub tolerances: BTreeMap<&'static str, f64>,
}

impl Artifact {
    pub fn new(name: &'static str, header: Vec<&'static str>) -> Self {
        Self { name, header, rows: Vec::new(), summary: json!({}), tolerances: BTreeMap::new() }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }

    pub fn summary(mut self, s: impl Serialize) -> Result<Self, CliError> {
        self.summary = serde_json::to_value(s).map_err(|e| CliError::Io(e.to_string()))?;
        Ok(self)
    }

    pub fn tolerance(mut self, key: &'static str, v: f64) -> Self {
        self.tolerances.insert(key, v);
        self
    }

    fn meta(&self, cfg: &ExperimentConfig, hash: &str) -> serde_json::Value {
        json!({
            "experiment": self.name,
            "config_hash": hash,
            "versions": { "spinlab": spinlab::VERSION, "spinlab-cli": env!("CARGO_PKG_VERSION") },
            "tolerances": self.tolerances,
            "config": cfg,
        })
    }

    /// Writes both files; no timestamps or host data, so equal configs give equal bytes.
    pub fn write(&self, dir: &Path, cfg: &ExperimentConfig) -> Result<(PathBuf, PathBuf), CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let hash = cfg.hash();
        let meta = self.meta(cfg, &hash);
        let csv_path = dir.join(format!("{}.csv", self.name));
        let json_path = dir.join(format!("{}.json", self.name));

        let mut body = format!("# {}\n", serde_json::to_string(&meta).map_err(|e| CliError::Io(e.to_string()))?);
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).map_err(|e| CliError::Io(e.to_string()))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| CliError::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        body.push_str(&String::from_utf8(bytes).expect("csv of utf-8 cells"));
        std::fs::write(&csv_path, body).map_err(|e| CliError::Io(format!("{}: {e}", csv_path.display())))?;

        let doc = json!({ "meta": meta, "summary": self.summary });
        let mut text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        std::fs::write(&json_path, text).map_err(|e| CliError::Io(format!("{}: {e}", json_path.display())))?;
        Ok((csv_path, json_path))
    }
}

pub fn num(v: f64) -> String {
    format!("{v:e}")
}
