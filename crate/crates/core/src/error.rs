use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not converge: achieved error {achieved:.3e}, requested {requested:.3e}")]
    QuadratureNotConverged { achieved: f64, requested: f64 },

    #[error("unsupported evaluation: {0}")]
    UnsupportedEvaluation(String),

    #[error("inverted elements: {ids:?}")]
    InvertedElements { ids: Vec<usize> },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("singular factorization (pivot {pivot})")]
    SingularFactorization { pivot: usize },

    #[error("linear solve residual {residual:.3e} above tolerance {tolerance:.3e}")]
    SolverResidual { residual: f64, tolerance: f64 },

    #[error("iterative solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64, history: Vec<f64> },

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// `origin` is `path:line` for config files and `--key` for overrides.
    #[error("config error at {origin}: {message}")]
    Config { origin: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::InvalidParameter(_) | Error::Parse(_) => 2,
            _ => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::QuadratureNotConverged { .. } => "quadrature_not_converged",
            Error::UnsupportedEvaluation(_) => "unsupported_evaluation",
            Error::InvertedElements { .. } => "inverted_elements",
            Error::InvalidMesh(_) => "invalid_mesh",
            Error::SingularFactorization { .. } => "singular_factorization",
            Error::SolverResidual { .. } => "solver_residual",
            Error::NotConverged { .. } => "not_converged",
            Error::Eigen(_) => "eigen",
            Error::DegenerateFit(_) => "degenerate_fit",
            Error::Config { .. } => "config",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
