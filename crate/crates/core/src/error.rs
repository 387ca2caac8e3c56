use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field lives on a different grid (expected {expected} nodes, got {got})")]
    GridMismatch { expected: usize, got: usize },

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid boundary schedule: {0}")]
    InvalidSchedule(String),

    #[error("infeasible box at node {node}: lower {lower} > upper {upper}")]
    InfeasibleBox { node: usize, lower: f64, upper: f64 },

    #[error("{solver} did not converge in {iterations} iterations (residual {residual:e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error(
        "alternating minimization exceeded {sweeps} sweeps (last energy decrease {last_decrease:e}, energy {energy:e})"
    )]
    SweepCapExceeded {
        sweeps: usize,
        last_decrease: f64,
        energy: f64,
    },

    #[error("energy estimate violated at step {step}: {accepted:e} > {warm_start:e}")]
    EstimateViolated {
        step: usize,
        accepted: f64,
        warm_start: f64,
    },

    #[error("invalid crack site: {0}")]
    InvalidCrackSite(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {reason}")]
    Malformed { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
