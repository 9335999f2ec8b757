use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("edge list contains no edges or nodes")]
    EmptyInput,

    #[error("edge ({0}, {1}) is not present in the graph")]
    MissingEdge(usize, usize),

    #[error("node index {index} out of range for a graph with {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("path enumeration exceeded the budget of {0} paths")]
    OracleOverflow(u64),

    #[error("requested {requested} negative pairs but only {available} non-edges are available")]
    InsufficientNonEdges { requested: usize, available: usize },

    #[error("score list is empty")]
    EmptyScores,

    #[error("score list contains NaN")]
    NanScore,

    #[error("feature file: {0}")]
    Features(String),

    #[error("config: {0}")]
    Config(String),

    #[error("run {run} failed: {source}")]
    Run {
        run: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True when the error stems from caller-supplied parameters rather than data.
    pub fn is_usage(&self) -> bool {
        match self {
            Error::InvalidParameter(_) | Error::Config(_) => true,
            Error::Run { source, .. } => source.is_usage(),
            _ => false,
        }
    }
}
