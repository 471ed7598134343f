use std::path::PathBuf;

use thiserror::Error;

use crate::model::{AcceptabilityReport, StructureViolation};

pub type Result<T> = std::result::Result<T, CgnError>;

#[derive(Debug, Error)]
pub enum CgnError {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Caller broke a documented precondition (length mismatch, bad index, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("matrix is not positive definite ({context}): pivot {pivot} = {value:e}")]
    NotPositiveDefinite {
        context: String,
        pivot: usize,
        value: f64,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid structure: {}", format_violations(.0))]
    InvalidStructure(Vec<StructureViolation>),

    #[error("sample is not acceptable for the structure: {0}")]
    NotAcceptable(AcceptabilityReport),

    #[error("degenerate prior: variable `{variable}` has zero empirical variance")]
    DegeneratePrior { variable: String },

    #[error("structure search failed: {0}")]
    Search(String),

    #[error("experiment failed: {0}")]
    Experiment(String),
}

impl CgnError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CgnError::Io {
            path: path.into(),
            source,
        }
    }
}

fn format_violations(v: &[StructureViolation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
