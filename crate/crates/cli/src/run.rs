//! Per-run bookkeeping: atomic artifact writes, phase timings, and the JSON
//! manifest.

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use serde_json::{json, Map, Value};
use specrkhs::io::write_atomic;

use crate::error::CliError;

static WARNINGS: Mutex<Vec<String>> = Mutex::new(Vec::new());

/// Forwards records to stderr and keeps warnings for the manifest.
pub struct Logger {
    pub level: log::LevelFilter,
}

impl log::Log for Logger {
    fn enabled(&self, meta: &log::Metadata) -> bool {
        meta.level() <= self.level || meta.level() <= log::Level::Warn
    }

    fn log(&self, record: &log::Record) {
        if record.level() <= log::Level::Warn {
            WARNINGS.lock().unwrap_or_else(|e| e.into_inner()).push(record.args().to_string());
        }
        if record.level() <= self.level {
            eprintln!("[{}] {}", record.level().as_str().to_ascii_lowercase(), record.args());
        }
    }

    fn flush(&self) {}
}

pub fn take_warnings() -> Vec<String> {
    std::mem::take(&mut *WARNINGS.lock().unwrap_or_else(|e| e.into_inner()))
}

pub struct Run {
    out_dir: PathBuf,
    start: Instant,
    timings: Map<String, Value>,
    outputs: Vec<String>,
    info: Map<String, Value>,
}

impl Run {
    pub fn new(out_dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(out_dir)
            .map_err(|source| CliError::Io { context: format!("creating {}", out_dir.display()), source })?;
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            start: Instant::now(),
            timings: Map::new(),
            outputs: Vec::new(),
            info: Map::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    pub fn timed<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        let secs = t.elapsed().as_secs_f64();
        log::info!("{phase}: {secs:.3} s");
        let slot = self.timings.entry(phase.to_string()).or_insert(json!(0.0));
        *slot = json!(slot.as_f64().unwrap_or(0.0) + secs);
        out
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        write_atomic(&self.path(name), bytes)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn note(&mut self, key: &str, value: Value) {
        self.info.insert(key.to_string(), value);
    }

    /// Writes `manifest.json`; the manifest is the only file carrying timings.
    pub fn finish(mut self, command: &str, config: Value, error: Option<&CliError>) -> Result<(), CliError> {
        self.timings.insert("total".into(), json!(self.start.elapsed().as_secs_f64()));
        let manifest = json!({
            "command": command,
            "status": if error.is_some() { "error" } else { "ok" },
            "error": error.map(|e| e.to_json()["error"].clone()),
            "config": config,
            "versions": { "specrkhs": env!("CARGO_PKG_VERSION") },
            "threads": rayon::current_num_threads(),
            "results": self.info,
            "outputs": self.outputs,
            "warnings": take_warnings(),
            "timings": self.timings,
        });
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        write_atomic(&self.out_dir.join("manifest.json"), text.as_bytes())?;
        Ok(())
    }
}
