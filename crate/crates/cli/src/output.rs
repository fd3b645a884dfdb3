//! Output files. CSV tables carry `# key: value` header lines and JSON
//! documents a `meta` object, so every artifact names the tool version,
//! config hash, seed and generator.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use frameless_core::simulator::RNG_ID;
use serde::Serialize;
use serde_json::Value;

use crate::error::CliResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub rng: &'static str,
}

impl Meta {
    pub fn new(command: &str, config_hash: String, seed: u64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config_hash,
            seed,
            rng: RNG_ID,
        }
    }

    fn csv_header(&self) -> String {
        format!(
            "# tool: {} {}\n# command: {}\n# config_hash: {}\n# seed: {}\n# rng: {}\n",
            self.tool, self.version, self.command, self.config_hash, self.seed, self.rng
        )
    }
}

/// What a command produced: named CSV tables (the first is primary) and a
/// JSON summary.
pub struct Report {
    pub tables: Vec<(String, String)>,
    pub summary: Value,
}

impl Report {
    pub fn new(summary: Value) -> Self {
        Self {
            tables: Vec::new(),
            summary,
        }
    }

    pub fn table(mut self, name: &str, csv: String) -> Self {
        self.tables.push((name.to_string(), csv));
        self
    }
}

pub struct Sink {
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl Sink {
    /// With an output directory every table and the summary become files;
    /// otherwise the primary table or the summary goes to stdout.
    pub fn emit(&self, meta: &Meta, report: &Report) -> CliResult<()> {
        let json = || {
            let doc = serde_json::json!({ "meta": meta, "result": report.summary });
            serde_json::to_string_pretty(&doc).expect("json serializes") + "\n"
        };
        match &self.out {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                for (name, csv) in &report.tables {
                    fs::write(dir.join(format!("{name}.csv")), meta.csv_header() + csv)?;
                }
                fs::write(dir.join(format!("{}.json", meta.command)), json())?;
            }
            None => {
                let text = match (self.format, report.tables.first()) {
                    (Format::Csv, Some((_, csv))) => meta.csv_header() + csv,
                    _ => json(),
                };
                std::io::stdout().lock().write_all(text.as_bytes())?;
            }
        }
        Ok(())
    }
}
