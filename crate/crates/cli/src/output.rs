use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use fracblow_core::Error;
use serde::Serialize;
use serde_json::{json, Value};

use crate::CliError;

static OUT_DIR: OnceLock<PathBuf> = OnceLock::new();

/// Creates the output directory and remembers it for the diagnostic file.
pub fn prepare(dir: &Path) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let _ = OUT_DIR.set(dir.to_path_buf());
    Ok(dir.to_path_buf())
}

pub fn last_dir() -> Option<PathBuf> {
    OUT_DIR.get().cloned()
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Formats a float so that it round-trips and uses exponent notation only at extreme magnitudes.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Table {
            header: header.iter().map(|h| h.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn push_nums(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|v| num(*v)).collect());
    }

    fn write_to<W: std::io::Write>(&self, w: W) -> Result<(), CliError> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| CliError::Io(e.to_string());
        out.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            out.write_record(r).map_err(io)?;
        }
        out.flush().map_err(|e| CliError::Io(e.to_string()))
    }

    pub fn write(&self, dir: &Path, name: &str) -> Result<(), CliError> {
        let path = dir.join(name);
        let file = std::fs::File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.write_to(file)
    }

    pub fn print(&self) -> Result<(), CliError> {
        self.write_to(std::io::stdout().lock())
    }
}

/// Coordinate column names `x1..xN`.
pub fn coord_header(dim: usize) -> Vec<String> {
    (1..=dim).map(|k| format!("x{k}")).collect()
}

pub fn diagnostic(e: &CliError) -> Value {
    let (kind, details) = match e {
        CliError::Core(err) => match err {
            Error::NoConvergence {
                iterations,
                residual,
                history,
            } => ("no_convergence", json!({ "iterations": iterations, "residual": residual, "history": history })),
            Error::PolicyCycling { iterations, history } => ("policy_cycling", json!({ "iterations": iterations, "history": history })),
            Error::NegativeWeight { row, weight, context } => ("negative_weight", json!({ "row": row, "weight": weight, "context": context })),
            Error::CertificationFailed { point, value, required } => {
                ("certification_failed", json!({ "point": point, "value": value, "required": required }))
            }
            Error::NonIntegrable { diagnostic } => ("non_integrable", json!({ "diagnostic": diagnostic })),
            Error::DivergentExtrapolation(m) => ("divergent_extrapolation", json!({ "detail": m })),
            Error::InsufficientData(m) => ("insufficient_data", json!({ "detail": m })),
            other => ("numerical", json!({ "detail": other.to_string() })),
        },
        CliError::Check { report, .. } => ("check_failed", report.clone()),
        other => ("error", json!({ "detail": other.to_string() })),
    };
    json!({ "error": kind, "message": e.to_string(), "details": details })
}
