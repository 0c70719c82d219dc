use thiserror::Error;

use crate::hjb::SolveReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("ellipticity violated: a({t}, {xi}) = {value}")]
    Ellipticity { t: f64, xi: f64, value: f64 },

    #[error("noise coefficient out of bounds: |g({t}, {xi})| = {value} not in ({k1}, {k2})")]
    NoiseBounds {
        t: f64,
        xi: f64,
        value: f64,
        k1: f64,
        k2: f64,
    },

    #[error("covariance is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("covariance is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("vector lies outside the reproducing kernel space (residual {residual:e})")]
    OutsideRange { residual: f64 },

    #[error(
        "null controllability fails on [{s}, {t}]: column {column} of S(t,s) leaves range(Q) (residual {residual:e})"
    )]
    NullControllability {
        s: f64,
        t: f64,
        column: usize,
        residual: f64,
    },

    #[error("degenerate window [{s}, {t}] below grid resolution")]
    DegenerateWindow { s: f64, t: f64 },

    #[error("rank deficient covariance on the {side} side (rank {rank} of {dim})")]
    RankDeficient {
        side: &'static str,
        rank: usize,
        dim: usize,
    },

    #[error("exponent fit needs {required_pairs} pairs over {required_decades} decades, got {pairs} pairs over {decades:.3}")]
    FitSpan {
        pairs: usize,
        decades: f64,
        required_pairs: usize,
        required_decades: f64,
    },

    #[error("smoothing exponent {alpha} is not in (0, 1)")]
    ExponentOutOfRange { alpha: f64 },

    #[error("iteration failed to contract (last ratios {:?})", .report.contraction_ratios.iter().rev().take(3).collect::<Vec<_>>())]
    NonContraction { report: Box<SolveReport> },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("coefficient lattice: {0}")]
    Lattice(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
