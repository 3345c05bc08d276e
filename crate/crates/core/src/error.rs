use thiserror::Error;

/// Everything that can go wrong between reading a config and writing a report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error in {source_name}: {message}")]
    Parse {
        source_name: String,
        message: String,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("convergence failure after {iterations} iterations (bracket [{lo}, {hi}])")]
    Convergence { iterations: usize, lo: f64, hi: f64 },

    #[error("characteristic function failed to decay below {tol:e} by xi = {xi_max}")]
    NonDecay { tol: f64, xi_max: f64 },

    #[error("internal consistency violated: {identity} (residual {residual:e})")]
    Consistency {
        identity: &'static str,
        residual: f64,
    },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("degenerate result: {0}")]
    Degenerate(String),

    #[error("variance condition Var(sum X) >= {threshold} K failed: Var/K = {observed}")]
    VarianceCondition { threshold: f64, observed: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("serialization error: {0}")]
    Serialization(String),

    /// An error raised while evaluating one cell of a sweep.
    #[error("at K = {k}, sigma = {sigma}: {source}")]
    AtCell {
        k: usize,
        sigma: f64,
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Parse { .. }
            | Error::Dimension { .. }
            | Error::Unsupported(_)
            | Error::Io(_) => 1,
            Error::Consistency { .. } | Error::Invariant(_) | Error::Serialization(_) => 2,
            Error::Degenerate(_) | Error::VarianceCondition { .. } | Error::NonDecay { .. } => 3,
            Error::Resolution(_) | Error::Convergence { .. } => 2,
            Error::AtCell { source, .. } => source.exit_code(),
        }
    }

    pub fn at_cell(self, k: usize, sigma: f64) -> Self {
        Error::AtCell {
            k,
            sigma,
            source: Box::new(self),
        }
    }

    /// The innermost error, past any sweep context.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtCell { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
