use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("singular denominator: {0}")]
    Singular(String),

    /// The odd-parity logarithmic derivative has a simple pole at the node.
    #[error("logarithmic derivative has a pole at x = 0 for odd parity; use the pole-subtracted form")]
    Pole,

    #[error("non-finite {what} at x = {x:e}")]
    NonFinite { x: f64, what: String },

    #[error("perturbation order {k}: non-finite Q_k at x = {x:e}")]
    Series { k: usize, x: f64 },

    #[error("no sign change in bracket [{lo}, {hi}]: {hint}")]
    Bracket { lo: f64, hi: f64, hint: String },

    #[error("parity mismatch: trial is {trial}, reference is {reference}")]
    ParityMismatch { trial: String, reference: String },

    #[error("ill-conditioned fit (condition estimate {0:e})")]
    IllConditioned(f64),

    #[error("window outside converged region: {0}")]
    Window(String),

    #[error("objective evaluation failed at (A, D, alpha) = ({a:.6}, {d:.6}, {alpha:.6}): {source}")]
    Objective {
        a: f64,
        d: f64,
        alpha: f64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Short machine-readable tag for diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::InvalidParam(_) => "invalid_param",
            Error::Singular(_) => "singular",
            Error::Pole => "pole",
            Error::NonFinite { .. } => "non_finite",
            Error::Series { .. } => "series",
            Error::Bracket { .. } => "bracket",
            Error::ParityMismatch { .. } => "parity_mismatch",
            Error::IllConditioned(_) => "ill_conditioned",
            Error::Window(_) => "window",
            Error::Objective { .. } => "objective",
        }
    }

    /// True for errors caused by the inputs rather than by the numerics.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Domain(_) | Error::InvalidParam(_) | Error::ParityMismatch { .. })
    }
}
