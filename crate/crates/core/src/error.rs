use std::path::PathBuf;

use thiserror::Error;

use crate::game::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid game: {}", join_violations(.0))]
    InvalidGame(Vec<Violation>),

    #[error("{kind} id {id} out of range (limit {limit})")]
    InvalidId { kind: &'static str, id: usize, limit: usize },

    #[error("parameter `{name}` = {value} outside {expected}")]
    OutOfRange { name: &'static str, value: f64, expected: &'static str },

    #[error("{0}")]
    Invalid(String),

    #[error("enumeration of {count} {what} exceeds budget {budget}")]
    BudgetExceeded { what: &'static str, count: u128, budget: u128 },

    #[error("game is not weakly acyclic")]
    NotWeaklyAcyclic,

    #[error("player {player} has no phase boundary at t = {time} (next boundary at {next})")]
    NotABoundary { player: usize, time: u64, next: u64 },

    #[error("time {time} is beyond the horizon {horizon}")]
    BeyondHorizon { time: u64, horizon: u64 },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Checks `lo <= value <= hi` (or the open variant) and reports the failure.
pub(crate) fn check_range(
    name: &'static str,
    value: f64,
    lo: f64,
    hi: f64,
    open_lo: bool,
    open_hi: bool,
    expected: &'static str,
) -> Result<()> {
    let lo_ok = if open_lo { value > lo } else { value >= lo };
    let hi_ok = if open_hi { value < hi } else { value <= hi };
    if lo_ok && hi_ok {
        Ok(())
    } else {
        Err(Error::OutOfRange { name, value, expected })
    }
}
