use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use thiserror::Error;

use nlp_core::problem::Violation;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("problem rejected: {}", .0.iter().map(|v| v.message.as_str()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Solver(#[from] nlp_core::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn parse(path: &Path, err: &serde_json::Error) -> Self {
        CliError::Parse {
            path: path.to_path_buf(),
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }

    /// Machine-readable form written on failure.
    pub fn to_json(&self) -> Value {
        let detail = match self {
            CliError::Parse {
                path,
                line,
                column,
                message,
            } => json!({"kind": "parse", "path": path, "line": line, "column": column, "message": message}),
            CliError::Io { path, source } => json!({"kind": "io", "path": path, "message": source.to_string()}),
            CliError::Csv { path, source } => json!({"kind": "csv", "path": path, "message": source.to_string()}),
            CliError::Invalid(v) => json!({"kind": "invalid-problem", "violations": v, "message": self.to_string()}),
            CliError::Usage(m) => json!({"kind": "usage", "message": m}),
            CliError::Solver(e) => solver_json(e),
        };
        json!({ "error": detail })
    }
}

fn solver_json(e: &nlp_core::Error) -> Value {
    use nlp_core::Error as E;
    let message = e.to_string();
    match e {
        E::InvalidArgument(_) => json!({"kind": "invalid-argument", "message": message}),
        E::KernelWindow { gap, t_min } => {
            json!({"kind": "kernel-window", "gap": gap, "t_min": t_min, "message": message})
        }
        E::RegularizationFailure {
            iterations, residual, ..
        } => json!({"kind": "regularization-failure", "iterations": iterations, "residual": residual, "message": message}),
        E::ContractionFailure {
            iterations,
            last_ratio,
            sup_diffs,
            ratios,
        } => json!({
            "kind": "contraction-failure",
            "iterations": iterations,
            "last_ratio": finite_or_null(*last_ratio),
            "sup_diffs": sup_diffs.iter().map(|v| finite_or_null(*v)).collect::<Vec<_>>(),
            "ratios": ratios.iter().map(|v| finite_or_null(*v)).collect::<Vec<_>>(),
            "message": message,
        }),
        E::StabilityFailure { t, node, value } => {
            json!({"kind": "stability-failure", "t": t, "node": node, "value": finite_or_null(*value), "message": message})
        }
        E::NumericFailure(_) => json!({"kind": "numeric-failure", "message": message}),
        E::ConstructionFailure { trace, .. } => {
            json!({"kind": "construction-failure", "trace": trace, "message": message})
        }
        E::LadderFailure { rung, epsilon, source } => json!({
            "kind": "ladder-failure",
            "rung": rung,
            "epsilon": epsilon,
            "cause": solver_json(source),
            "message": message,
        }),
        E::Internal(_) => json!({"kind": "internal", "message": message}),
        E::Domain(_) => json!({"kind": "domain", "message": message}),
    }
}

/// JSON has no infinities; a diverged ratio is reported as `null`.
fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}
