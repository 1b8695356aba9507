use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the domain of the operation.
    #[error("{op}: {msg}")]
    Domain { op: &'static str, msg: String },

    #[error("invalid box: {0}")]
    InvalidBox(String),

    /// The neighbour table has fewer columns than the weight vector needs.
    #[error("neighbour table has {available} columns but {required} are required")]
    TruncatedTable { required: usize, available: usize },

    #[error("window holds {points} points, at least {required} needed")]
    InsufficientPoints { points: usize, required: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// The connection range is almost surely infinite; nothing to simulate.
    #[error("connection range is infinite for this weight vector")]
    InfiniteRange,

    /// The crossing estimate does not straddle the target on the bracket.
    #[error("bracket [{lo}, {hi}] does not straddle target {target}: p(lo)={p_lo}, p(hi)={p_hi}")]
    Bracket {
        lo: f64,
        hi: f64,
        target: f64,
        p_lo: f64,
        p_hi: f64,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain {
            op,
            msg: msg.into(),
        }
    }
}
