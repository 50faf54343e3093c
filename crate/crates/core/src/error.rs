use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no rewrite applicable: word `{0}` is already normal")]
    NoRewrite(String),

    #[error("rewrite position {pos} is not an out-of-order pair in `{word}`")]
    BadRewritePosition { word: String, pos: usize },

    #[error("generator index {0} out of range (expected 1..=6)")]
    GeneratorIndex(usize),

    #[error("malformed pairing spec: {0}")]
    Pairing(String),

    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),

    #[error("unknown expansion mode `{0}` (expected `paper` or `rederived`)")]
    UnknownMode(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate theta grid: {0}")]
    DegenerateGrid(String),

    #[error("state {state:?} is within {margin} of the cutoff N_max = {n_max}")]
    NearCutoff {
        state: [u32; 3],
        n_max: u32,
        margin: u32,
    },

    #[error("step size violation: dt * |H| = {product:.3e} exceeds {limit}")]
    StepSize { product: f64, limit: f64 },

    #[error("non-finite state at t = {time}")]
    NonFinite { time: f64 },

    #[error("need at least {needed} time points, trajectory has {found}")]
    TooFewPoints { needed: usize, found: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("coefficient {0} does not fit the JSON integer range")]
    CoefficientOverflow(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
