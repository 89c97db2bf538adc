//! Scenario runner for the `zeno-fusion` engine.

pub mod config;
pub mod figures;
pub mod scenarios;

use std::fs;
use std::path::PathBuf;

use serde_json::{json, Value};
use zeno_fusion::Error;

pub use config::{Config, Scenario};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical abort: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NumericalAbort { .. }
            | Error::NotHermitian(_)
            | Error::ComplexFidelity(_)
            | Error::SmallEnergy(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Output files written under a path prefix.
#[derive(Debug)]
pub struct Artifacts {
    prefix: String,
    files: std::sync::Mutex<Vec<String>>,
}

impl Artifacts {
    /// A prefix ending in `/` is a directory; otherwise its parent is created.
    pub fn new(prefix: &str) -> Result<Self, CliError> {
        let dir = if prefix.ends_with('/') {
            Some(PathBuf::from(prefix))
        } else {
            PathBuf::from(prefix).parent().map(PathBuf::from)
        };
        if let Some(d) = dir.filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(&d)?;
        }
        Ok(Artifacts {
            prefix: prefix.to_string(),
            files: Default::default(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        PathBuf::from(format!("{}{name}", self.prefix))
    }

    fn record(&self, name: &str) {
        self.files.lock().unwrap().push(name.to_string());
    }

    pub fn files(&self) -> Vec<String> {
        let mut f = self.files.lock().unwrap().clone();
        f.sort();
        f
    }

    pub fn write_json(&self, name: &str, v: &Value) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(v).expect("json serializes");
        text.push('\n');
        fs::write(self.path(name), text)?;
        self.record(name);
        Ok(())
    }

    pub fn write_csv<H, R>(&self, name: &str, header: &[H], rows: impl IntoIterator<Item = R>) -> Result<(), CliError>
    where
        H: AsRef<str>,
        R: IntoIterator,
        R::Item: ToString,
    {
        let mut w = csv::Writer::from_path(self.path(name))?;
        w.write_record(header.iter().map(|h| h.as_ref()))?;
        for r in rows {
            w.write_record(r.into_iter().map(|x| x.to_string()))?;
        }
        w.flush()?;
        self.record(name);
        Ok(())
    }

    pub fn write_with(
        &self,
        name: &str,
        f: impl FnOnce(fs::File) -> zeno_fusion::Result<()>,
    ) -> Result<(), CliError> {
        f(fs::File::create(self.path(name))?)?;
        self.record(name);
        Ok(())
    }
}

pub const MANIFEST: &str = "manifest.json";

/// Runs the configured scenario and writes the manifest last. On a numerical
/// abort the manifest is still written, flagged as partial.
pub fn run(cfg: &Config) -> Result<Value, CliError> {
    let art = Artifacts::new(&cfg.out)?;
    let result = scenarios::dispatch(cfg, &art);
    let (status, summary, err) = match result {
        Ok(s) => ("ok", s, None),
        Err(CliError::Numerical(m)) => ("aborted", Value::Null, Some(CliError::Numerical(m))),
        Err(e) => return Err(e),
    };
    let manifest = json!({
        "tool": "zfuse",
        "version": env!("CARGO_PKG_VERSION"),
        "engine_version": zeno_fusion::VERSION,
        "scenario": cfg.scenario.name(),
        "status": status,
        "partial": err.is_some(),
        "error": err.as_ref().map(|e| e.to_string()),
        "outputs": art.files(),
        "config": cfg.to_json(),
    });
    art.write_json(MANIFEST, &manifest)?;
    match err {
        Some(e) => Err(e),
        None => Ok(summary),
    }
}
