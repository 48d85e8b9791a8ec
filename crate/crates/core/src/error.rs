use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("missing TVL observation for {protocol} in {month}")]
    TvlGap { protocol: String, month: String },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("degenerate response: every observation is {0}")]
    DegenerateResponse(u8),

    #[error("no events observed for {0}; use a peer interval instead")]
    NoEvents(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("Hosmer-Lemeshow test not applicable: {0}")]
    TestNotApplicable(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by bad inputs or configuration rather than
    /// by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. } | Error::Schema(_) | Error::Config(_) | Error::TvlGap { .. }
        )
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Schema(_) => "schema",
            Error::Config(_) => "config",
            Error::Domain(_) => "domain",
            Error::TvlGap { .. } => "tvl_gap",
            Error::NotPositiveDefinite { .. } => "not_positive_definite",
            Error::RankDeficient => "rank_deficient",
            Error::DegenerateResponse(_) => "degenerate_response",
            Error::NoEvents(_) => "no_events",
            Error::InsufficientData(_) => "insufficient_data",
            Error::TestNotApplicable(_) => "test_not_applicable",
            Error::Numerical(_) => "numerical",
        }
    }
}
