use thiserror::Error;

/// Error taxonomy shared by every solver stage.
///
/// CLI exit-code mapping: config problems (`Parse`, `Validation`, `Io`) exit 2,
/// solver divergence (`MaxIterations`, `PositivityLost`, `SingularOmega`,
/// `JacobianDegenerate`, `OuterDiverged`) exits 3, violated mathematical
/// preconditions and failed invariants exit 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degree error: {0}")]
    Degree(String),

    /// The quartic invariant is nonnegative: the 3-form has no complex-type
    /// orbit and no almost complex structure can be reconstructed from it.
    #[error("3-form is not of complex type: lambda = {lambda:.6e} >= 0")]
    NotComplexType { lambda: f64 },

    /// The target carries a harmonic (constant Fourier mode) part, so it
    /// cannot be exact.
    #[error("target has a zero-mode of magnitude {zero_mode:.3e} (tolerance {tol:.3e}); an exact form integrates to zero")]
    NotCohomologous { zero_mode: f64, tol: f64 },

    /// Some Fourier mode of the target lies outside the image of the
    /// mode-local operator beyond tolerance.
    #[error("target is not in the operator image: worst per-mode residual {residual:.3e} exceeds {tol:.3e}")]
    NotInImage { residual: f64, tol: f64 },

    #[error("unsupported complex dimension n = {0}: solvers cover n = 2 and n = 3")]
    UnsupportedDimension(usize),

    #[error("no convergence in {iterations} iterations; residual history {history:?}")]
    MaxIterations { iterations: usize, history: Vec<f64> },

    #[error("line search cannot keep the positivity margin above {floor}: best margin {margin:.3e}")]
    PositivityLost { margin: f64, floor: f64 },

    #[error("pointwise 2-form system is singular at a grid point")]
    SingularOmega,

    #[error("flow jacobian degenerated: min det = {det:.3e}")]
    JacobianDegenerate { det: f64 },

    #[error("outer density loop did not reach tolerance {tol:.1e}; residual history {history:?}")]
    OuterDiverged { tol: f64, history: Vec<f64> },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("config validation error: {0}")]
    Validation(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI contract.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) | Error::Validation(_) | Error::Io(_) => 2,
            Error::MaxIterations { .. }
            | Error::PositivityLost { .. }
            | Error::SingularOmega
            | Error::JacobianDegenerate { .. }
            | Error::OuterDiverged { .. } => 3,
            _ => 4,
        }
    }
}
