use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("spike {alpha} lies in the critical interval [{lo:.3}, {hi:.3}]")]
    CriticalInterval { alpha: f64, lo: f64, hi: f64 },

    #[error("{value} lies inside the spectral support [{lo:.3}, {hi:.3}]")]
    InsideSupport { value: f64, lo: f64, hi: f64 },

    #[error("{at} coincides with a bulk atom")]
    Singularity { at: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not Hermitian (relative asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("quadrature failed to reach tolerance {tol:e} within {panels} panels")]
    Quadrature { tol: f64, panels: usize },

    #[error("missing moment: {0}")]
    MissingMoment(String),

    #[error("too few replications: {got} < {need}")]
    TooFewReplications { got: usize, need: usize },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("replication {rep} (seed {seed:#018x}) failed: {source}")]
    Replication {
        rep: usize,
        seed: u64,
        source: Box<Error>,
    },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
