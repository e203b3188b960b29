use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};

pub mod analyze;
pub mod g2;
pub mod implant;
pub mod spectrum;
pub mod strain;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_OUT: &str = "pbv-out";

pub struct Context {
    pub out: PathBuf,
    pub seed: u64,
}

impl Context {
    pub fn new(out: Option<PathBuf>, seed: Option<u64>) -> Self {
        Context {
            out: out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            seed: seed.unwrap_or(0),
        }
    }

    fn ensure_out(&self) -> CliResult<()> {
        std::fs::create_dir_all(&self.out).map_err(|e| CliError::io(&self.out, e))
    }

    pub fn write(&self, name: &str, contents: &str) -> CliResult<PathBuf> {
        self.ensure_out()?;
        let path = self.out.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    /// Pretty JSON with `schema_version` added to the top-level object.
    pub fn write_json<T: Serialize>(&self, name: &str, report: &T) -> CliResult<PathBuf> {
        let text = versioned_json(report)?;
        self.write(name, &text)
    }

    /// Timestamps live here, never in data files.
    pub fn log(&self, command: &str, written: &[PathBuf]) -> CliResult<()> {
        let stamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let files: Vec<String> = written
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect();
        let line = format!("unix_time={stamp} command={command} seed={} files={}\n", self.seed, files.join(","));
        self.write("run.log", &line)?;
        Ok(())
    }
}

pub fn versioned_json<T: Serialize>(report: &T) -> CliResult<String> {
    let mut value = serde_json::to_value(report).map_err(|e| CliError::Numeric(e.to_string()))?;
    match &mut value {
        Value::Object(map) => {
            map.insert("schema_version".into(), json!(SCHEMA_VERSION));
        }
        other => {
            value = json!({ "schema_version": SCHEMA_VERSION, "data": other.take() });
        }
    }
    let mut text = serde_json::to_string_pretty(&value).map_err(|e| CliError::Numeric(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

pub fn read_input(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}
