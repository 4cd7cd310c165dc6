//! File emission: full-precision CSV and JSON, each stamped with the tool
//! version and the config digest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    #[default]
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn csv_preamble(config_digest: &str) -> String {
    format!("# heatlab {} config_digest={config_digest}\n", crate::VERSION)
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    config_digest: &'a str,
    data: &'a T,
}

pub fn json_document<T: Serialize>(config_digest: &str, data: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Envelope {
        tool: "heatlab",
        version: crate::VERSION,
        config_digest,
        data,
    })?;
    s.push('\n');
    Ok(s)
}

/// Writes `<stem>.csv` and/or `<stem>.json` into `dir`; returns the paths.
pub fn write_outputs<T: Serialize>(
    dir: &Path,
    stem: &str,
    format: OutputFormat,
    config_digest: &str,
    data: &T,
    csv: &str,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if format.csv() {
        let p = dir.join(format!("{stem}.csv"));
        fs::write(&p, csv)?;
        written.push(p);
    }
    if format.json() {
        let p = dir.join(format!("{stem}.json"));
        fs::write(&p, json_document(config_digest, data)?)?;
        written.push(p);
    }
    Ok(written)
}

/// A CSV body with the standard preamble; cells are written verbatim.
pub fn csv_table(config_digest: &str, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = csv_preamble(config_digest);
    out.push_str(&header.join(","));
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}
