use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the numerical modules can report.
///
/// Numeric payloads are carried as `f64` regardless of the scalar type the
/// computation ran in.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("matrix has eigenvalue {eigenvalue:.6e} below the non-negativity floor")]
    NegativeSpectrum { eigenvalue: f64 },
    #[error("potential sample {index} is negative ({value:.6e})")]
    NegativePotential { index: usize, value: f64 },
    #[error("need at least {required} samples, got {got}")]
    TooFewSamples { required: usize, got: usize },
    #[error("function is undefined at eigenvalue {eigenvalue:.6e}")]
    FunctionUndefinedAtEigenvalue { eigenvalue: f64 },
    #[error("real point {t:.6e} lies on the spectrum; use a boundary value")]
    OnSpectrumWithoutLimit { t: f64 },
    #[error("point {t:.6e} collides with eigenvalue {eigenvalue:.6e}")]
    EigenvalueCollision { t: f64, eigenvalue: f64 },
    #[error("Krein Weyl function has a pole at t = 0")]
    KreinAtZero,
    #[error("singular pencil B - M(z): relative smallest singular value {ratio:.3e}")]
    SingularPencil { ratio: f64 },
    #[error("the Dirichlet relation has no Weyl function of its own; use the reference resolvent")]
    DirichletParameter,
    #[error("imaginary part of M(i) is not positive definite (min eigenvalue {min_eigenvalue:.3e})")]
    DegenerateImaginaryPart { min_eigenvalue: f64 },
    #[error("z = {re:.6e}{im:+.6e}i lies on the real axis where a deficiency element does not decay")]
    RealSpectralPoint { re: f64, im: f64 },
    #[error("eigenvalue 0 produces a non-square-integrable kernel element")]
    ZeroEigenvalue,
    #[error("grid is empty")]
    EmptyGrid,
    #[error("tables are defined on different grids")]
    GridMismatch,
    #[error("bad grid: {0}")]
    BadGrid(String),
    #[error("eigensolver failure: {0}")]
    SolverFailure(String),
    #[error("shift {re:.6e}{im:+.6e}i lies on the discrete spectrum")]
    ShiftOnSpectrum { re: f64, im: f64 },
    #[error("test function violates f(0) = f'(0) = 0 (|f(0)| = {value:.3e}, |f'(0)| = {derivative:.3e})")]
    BoundaryViolation { value: f64, derivative: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Stable machine-readable code used in serialized reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NotHermitian { .. } => "not_hermitian",
            Error::NegativeSpectrum { .. } => "negative_spectrum",
            Error::NegativePotential { .. } => "negative_potential",
            Error::TooFewSamples { .. } => "too_few_samples",
            Error::FunctionUndefinedAtEigenvalue { .. } => "function_undefined_at_eigenvalue",
            Error::OnSpectrumWithoutLimit { .. } => "on_spectrum_without_limit",
            Error::EigenvalueCollision { .. } => "eigenvalue_collision",
            Error::KreinAtZero => "krein_at_zero",
            Error::SingularPencil { .. } => "singular_pencil",
            Error::DirichletParameter => "dirichlet_parameter",
            Error::DegenerateImaginaryPart { .. } => "degenerate_imaginary_part",
            Error::RealSpectralPoint { .. } => "real_spectral_point",
            Error::ZeroEigenvalue => "zero_eigenvalue",
            Error::EmptyGrid => "empty_grid",
            Error::GridMismatch => "grid_mismatch",
            Error::BadGrid(_) => "bad_grid",
            Error::SolverFailure(_) => "solver_failure",
            Error::ShiftOnSpectrum { .. } => "shift_on_spectrum",
            Error::BoundaryViolation { .. } => "boundary_violation",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidArgument(_) => "invalid_argument",
        }
    }

    /// True for failures of a linear or eigen solve, as opposed to invalid input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::SolverFailure(_) | Error::ShiftOnSpectrum { .. } | Error::SingularPencil { .. }
        )
    }
}
