use thiserror::Error;

/// Errors produced by the clustering pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate cluster {cluster}: {reason}")]
    DegenerateCluster {
        cluster: usize,
        reason: &'static str,
    },

    #[error("constraint null space has dimension {null_dim}, need at least {n_clusters}")]
    RankInfeasible { null_dim: usize, n_clusters: usize },

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    /// True for errors caused by bad input rather than by the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_) | Error::Parse { .. } | Error::Io(_)
        )
    }

    /// Short machine-friendly tag, used for the status column of result tables.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "invalid-config",
            Error::DegenerateCluster { .. } => "degenerate-cluster",
            Error::RankInfeasible { .. } => "rank-infeasible",
            Error::NotPositiveDefinite { .. } => "not-positive-definite",
            Error::Numerical(_) => "numerical",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
