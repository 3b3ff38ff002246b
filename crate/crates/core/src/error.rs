use thiserror::Error;

use crate::material::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension `{name}` = {value}")]
    InvalidDimension { name: &'static str, value: f64 },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("degenerate face {face} (area {area:e})")]
    DegenerateFace { face: usize, area: f64 },

    #[error("unknown material preset `{name}`; valid presets: {valid}")]
    UnknownPreset { name: String, valid: String },

    #[error("invalid material: {}", format_violations(.0))]
    InvalidMaterial(Vec<Violation>),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("conjugate gradient stalled after {iterations} iterations (relative residual {residual:e})")]
    CgNotConverged { iterations: usize, residual: f64 },

    #[error("non-finite state at vertex {vertex}")]
    NonFinite { vertex: usize },

    #[error("event {index} ({action}): {source}")]
    Event {
        index: usize,
        action: String,
        #[source]
        source: Box<Error>,
    },

    #[error("OBJ line {line}: {message}")]
    Obj { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors raised while stepping the solver (as opposed to bad input).
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::CgNotConverged { .. } | Error::NonFinite { .. } | Error::DegenerateFace { .. } => true,
            Error::Event { source, .. } => source.is_solver_failure(),
            _ => false,
        }
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}
