//! Transition-pathway optimization for a sector-coupled energy system with an
//! explicit chemical-industry process network.
//!
//! The library covers the full pipeline: domain model and validation
//! ([`model`]), aggregation of hourly series into weighted typical periods
//! ([`timeagg`]), translation of an investment window into a sparse linear
//! program ([`lp`], [`lp_build`], [`mps`]), a deterministic revised-simplex
//! solver with dual extraction ([`simplex`]), the rolling-horizon driver
//! ([`pathway`]), and post-solution electrification analytics such as the
//! cost-avoided metric and merit-order curves ([`analytics`]).

pub mod analytics;
pub mod dataset;
pub mod lp;
pub mod lp_build;
pub mod manifest;
pub mod model;
pub mod mps;
pub mod pathway;
pub mod simplex;
pub mod timeagg;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("model validation failed with {count} violation(s)")]
    InvalidModel { count: usize },

    #[error("window starting {window_start} is infeasible: {detail}")]
    InfeasibleWindow { window_start: i32, detail: String },

    #[error("no producer or import resolves product '{0}'")]
    UnresolvedProduct(String),

    #[error("solver failure: {0}")]
    Solver(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
