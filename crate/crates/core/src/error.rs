use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not symmetric: asymmetry {asymmetry:.3e} exceeds {bound:.3e}")]
    NotSymmetric { asymmetry: f64, bound: f64 },

    #[error(
        "eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:.3e})"
    )]
    EigNoConvergence { sweeps: usize, off_norm: f64 },

    #[error("matrix is not positive semidefinite: min eigenvalue {min_eig:.3e}")]
    NotPsd { min_eig: f64 },

    #[error("numerical rank {rank} exceeds bound {bound}")]
    RankExceeds { rank: usize, bound: usize },

    #[error("layer widths incompatible: {0}")]
    WidthIncompatible(String),

    #[error("training diverged: objective {objective:.3e} exceeds {limit:.3e}")]
    Divergence { objective: f64, limit: f64 },

    #[error("invalid mixture weights: {0}")]
    InvalidWeights(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("numerical breakdown: {0}")]
    Breakdown(String),

    #[error("sandwich violated: lower bound {lower_bound:.12e} exceeds optimum {opt_value:.12e} by more than {tol:.1e}")]
    SandwichViolation {
        lower_bound: f64,
        opt_value: f64,
        tol: f64,
    },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("shape error in {field}: {message}")]
    Shape { field: String, message: String },

    #[error("unknown schema version {0}")]
    UnknownSchema(u32),

    #[error("unknown generator '{0}'")]
    UnknownGenerator(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn shape(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Shape {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}
