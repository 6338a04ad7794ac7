use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("order {n} exceeds the configured cap {cap}")]
    OrderCapExceeded { n: usize, cap: usize },
    #[error("field evaluated within {radius:e} of its source")]
    EvalAtSource { radius: f64 },
    #[error("fields live on different quadrature rules")]
    RuleMismatch,
    #[error("quadrature rule too coarse: needs n_theta >= {needed}, has {have}")]
    DegreeTooLow { needed: usize, have: usize },
    #[error("polarization not orthogonal to direction (p.d = {dot:e})")]
    InvalidPolarization { dot: f64 },
    #[error("test ball too close to an interior eigenvalue at orders {orders:?}")]
    InteriorEigenvalueNear { orders: Vec<usize> },
    #[error("point lies inside the ball")]
    EvalInsideBall,
    #[error("adaptive quadrature did not converge (error estimate {estimate:e})")]
    QuadratureFailure { estimate: f64 },
    #[error("singular parameter combination: k = {k}, lambda = {lambda}")]
    SingularParameterCombination { k: f64, lambda: f64 },
    #[error("least-squares system ill-conditioned: residual {residual:e}")]
    IllConditioned { residual: f64 },
    #[error("polyhedron is not convex: {0}")]
    NonConvexInput(String),
    #[error("malformed input: {0}")]
    Schema(String),
    #[error("data carries no signal (all test balls accepted)")]
    DegenerateData,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit code: 2 numerical failure, 3 input error, 4 guarded singular configuration.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SingularParameterCombination { .. } | Error::InteriorEigenvalueNear { .. } => 4,
            Error::IllConditioned { .. }
            | Error::QuadratureFailure { .. }
            | Error::EvalAtSource { .. }
            | Error::EvalInsideBall
            | Error::DegenerateData => 2,
            Error::Domain(_)
            | Error::OrderCapExceeded { .. }
            | Error::RuleMismatch
            | Error::DegreeTooLow { .. }
            | Error::InvalidPolarization { .. }
            | Error::NonConvexInput(_)
            | Error::Schema(_)
            | Error::Io(_)
            | Error::Json(_) => 3,
        }
    }
}
