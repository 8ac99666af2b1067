use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the set where the requested quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A sweep grid is too coarse to bracket the quantity being searched for.
    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("pair (alpha={alpha}, beta={beta}) is not admissible for n={n}, p={p}")]
    NotAdmissible { n: u32, p: f64, alpha: f64, beta: f64 },

    #[error("positivity lost at t={t} after {halvings} step halvings")]
    PositivityLoss { t: f64, halvings: u32 },

    #[error("non-finite value in the solution at t={t}")]
    Instability { t: f64 },

    #[error("time {t} is outside the stored span [{lo}, {hi}]")]
    OutOfSpan { t: f64, lo: f64, hi: f64 },

    #[error("times out of order: {0}")]
    TimeOrder(String),

    #[error("series never blew up (final max {final_max}, initial max {initial_max})")]
    NoBlowup { initial_max: f64, final_max: f64 },

    #[error("degenerate fitting window: {0}")]
    DegenerateWindow(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("failed to parse {what}: {source}")]
    Parse {
        what: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("malformed data in {path}: {reason}")]
    Format { path: String, reason: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
