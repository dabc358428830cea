use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::time::Instant;

use seamcut::Error;
use serde::Serialize;
use serde_json::Value;

/// Failure classes, mapped to process exit codes.
#[derive(Debug)]
pub enum Failure {
    Internal(String),
    Input(String),
    Topology(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Internal(_) => 1,
            Failure::Input(_) => 2,
            Failure::Topology(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Internal(m) => write!(f, "internal error: {m}"),
            Failure::Input(m) => write!(f, "input error: {m}"),
            Failure::Topology(m) => write!(f, "topology error: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::NonDiskChart { .. } => Failure::Topology(msg),
            Error::SolverDiverged { .. } | Error::Training { .. } | Error::NonFinite(_) => Failure::Internal(msg),
            _ => Failure::Input(msg),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, Failure>;

#[derive(Debug, Serialize)]
pub struct Stage {
    pub name: String,
    pub seconds: f64,
}

/// Machine-readable record of one command run.
#[derive(Debug, Serialize)]
pub struct PipelineReport {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub stages: Vec<Stage>,
    pub counts: BTreeMap<String, usize>,
    pub metrics: BTreeMap<String, Value>,
    pub warnings: Vec<String>,
}

impl PipelineReport {
    pub fn new(command: &str, seed: u64) -> Self {
        PipelineReport {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            stages: Vec::new(),
            counts: BTreeMap::new(),
            metrics: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    /// Runs `f` and records its wall time under `name`. Stage names must be
    /// unique within a report.
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> CliResult<T>) -> CliResult<T> {
        assert!(self.stages.iter().all(|s| s.name != name), "stage {name} recorded twice");
        let start = Instant::now();
        let out = f(self);
        self.stages.push(Stage { name: name.into(), seconds: start.elapsed().as_secs_f64() });
        out
    }

    pub fn input(&mut self, key: &str, path: &Path) {
        self.inputs.insert(key.into(), path.display().to_string());
    }

    pub fn output(&mut self, key: &str, path: &Path) {
        self.outputs.insert(key.into(), path.display().to_string());
    }

    pub fn count(&mut self, key: &str, n: usize) {
        self.counts.insert(key.into(), n);
    }

    pub fn metric(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.metrics.insert(key.into(), v);
    }

    pub fn warn(&mut self, message: String) {
        eprintln!("warning: {message}");
        self.warnings.push(message);
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Failure::Internal(format!("{}: {e}", path.display())))
    }
}

/// `dir/foo.obj` with suffix `seams.json` gives `dir/foo.seams.json`.
pub fn sibling(input: &Path, suffix: &str) -> std::path::PathBuf {
    let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    input.with_file_name(format!("{stem}.{suffix}"))
}
