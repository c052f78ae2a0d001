use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Per-server load at or within the stability margin of 1.
    #[error("unstable queue: per-server load {load} is not below 1")]
    Unstable { load: f64 },

    #[error("SLA index {index} out of range 1..={len}")]
    Index { index: usize, len: usize },

    /// SLA assignments do not form contiguous blocks in type order.
    #[error("segmentation structure error: {0}")]
    Structure(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no feasible candidate: {0}")]
    NoFeasibleCandidate(String),

    #[error("search budget exhausted after {evaluated} candidates")]
    BudgetExceeded { evaluated: u64 },

    #[error("simulation misconfigured: {0}")]
    Simulation(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("scenario validation failed:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable category, printed by the CLI next to the message.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Domain(_) | Error::InvalidParameter(_) | Error::Index { .. } => "invalid-input",
            Error::Unstable { .. } => "unstable",
            Error::Structure(_) | Error::Precondition(_) => "precondition",
            Error::NoFeasibleCandidate(_) => "infeasible",
            Error::BudgetExceeded { .. } => "budget",
            Error::Simulation(_) => "simulation",
            Error::Parse { .. } | Error::Validation(_) => "config",
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => "io",
        }
    }

    /// Process exit code for the CLI. Zero is never returned.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 2,
            "invalid-input" | "precondition" => 3,
            "unstable" | "simulation" => 4,
            "infeasible" => 5,
            "budget" => 6,
            _ => 10,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
