//! Set-valued multi-class classification with controlled expected set size.
//!
//! A confidence-set classifier returns a *subset* of the `K` labels instead of
//! a single one. The central object is the score-survival function
//! `G(t) = sum_k P(p_k(X) > t)`: thresholding the class scores at the
//! generalized inverse `G^{-1}(beta)` yields the rule with the smallest error
//! among all rules whose expected set size equals `beta`.
//!
//! The crate builds four families of rules and the machinery to benchmark
//! them:
//!
//! * top-`beta` rules (fixed cardinality),
//! * supervised plug-in rules (threshold calibrated on held-out labeled
//!   features),
//! * semi-supervised plug-in rules (threshold calibrated on held-out plus
//!   unlabeled features),
//! * Monte-Carlo oracle rules (threshold calibrated on the exact posterior).
//!
//! Modules mirror the pipeline: [`distgen`] generates benchmark data,
//! [`probest`] fits class-probability models, [`gfun`] estimates thresholds,
//! [`rules`] assembles rules, [`metrics`] scores them, and [`bench`]
//! orchestrates repeated experiments.

pub mod bench;
pub mod dataio;
pub mod distgen;
pub mod gfun;
pub mod metrics;
pub mod probest;
pub mod rng;
pub mod rules;
pub mod types;

use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("label spaces disagree: K = {0} vs K = {1}")]
    LabelSpaceMismatch(u32, u32),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty dataset where at least one row is required")]
    EmptyDataset,

    #[error("empty score matrix")]
    EmptyScores,

    #[error("beta = {beta} outside the valid range {lo}..={hi}")]
    BetaOutOfRange { beta: f64, lo: f64, hi: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("label {0} outside 1..={1}")]
    LabelOutOfRange(u32, u32),

    #[error("non-finite feature value at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },

    #[error("point with norm {0} lies off the support of the distribution")]
    OffSupport(f64),

    #[error("degenerate sweep grid: {0}")]
    DegenerateGrid(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub use gfun::{EmpiricalG, Threshold};
pub use probest::ProbModel;
pub use rules::{ConfidenceRule, FitConfig, RuleMode};
pub use types::{
    ConfidenceSet, EvalReport, LabelSpace, LabeledDataset, Matrix, RiskSample, ScoreMatrix,
    UnlabeledDataset,
};
