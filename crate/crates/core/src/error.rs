use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid weights: corner weight {index} solved to {value:e}")]
    InvalidWeights { index: usize, value: f64 },

    #[error("no bracket for q = {q} (x = {x:?}): cdf({lo:e}) = {cdf_lo}, cdf({hi:e}) = {cdf_hi}")]
    BracketNotFound {
        q: f64,
        x: Vec<f64>,
        lo: f64,
        hi: f64,
        cdf_lo: f64,
        cdf_hi: f64,
    },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("quadrature did not converge: order {order}, relative change {rel_change:e}")]
    Quadrature { order: usize, rel_change: f64 },

    #[error("closed-form quantile broke down: {0}")]
    ClosedForm(String),

    #[error("quantile inversion failed at q = {q}, x = {x:?}: {source}")]
    Inversion {
        q: f64,
        x: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error("posterior state {state}: {source}")]
    State {
        state: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("only {k} exceedances, at least {required} needed")]
    InsufficientExceedances { k: usize, required: usize },

    #[error("data error: {0}")]
    Data(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures caused by the numbers rather than by inputs or files.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::InvalidWeights { .. }
            | Error::BracketNotFound { .. }
            | Error::NoConvergence { .. }
            | Error::Quadrature { .. }
            | Error::ClosedForm(_) => true,
            Error::Inversion { source, .. } | Error::State { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}
