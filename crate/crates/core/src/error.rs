use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("level {level} too large for grid of {grid} points (need 2N+1 <= L)")]
    LevelTooLarge { level: usize, grid: usize },

    #[error("grid size must be at least 1")]
    EmptyGrid,

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("spectrum of degree {degree} needs {expected} coefficients, got {got}")]
    SpectrumLength { degree: usize, expected: usize, got: usize },

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("sampling set needs at least 2 points, got {0}")]
    TooFewPoints(usize),

    #[error("sampling points not strictly increasing at index {0}")]
    NotSorted(usize),

    #[error("sampling point {value} at index {index} outside [0, 1)")]
    OutOfDomain { index: usize, value: f64 },

    #[error("irregularity must lie in [0, 1), got {0}")]
    InvalidIrregularity(f64),

    #[error("Nyquist condition violated: (2N+1)*gamma = {density} >= 1 at level {level}")]
    NyquistViolated { level: usize, density: f64 },

    #[error("eigenvalue iteration did not converge within {iterations} steps")]
    NoConvergence { iterations: usize },

    #[error("frame operator is numerically singular at level {level} (lower bound {lower})")]
    SingularFrame { level: usize, lower: f64 },

    #[error("search direction vanished (exact solution or rank deficiency)")]
    ZeroDirection,

    #[error("normal equations already solved (T* r = 0)")]
    NormalEquationsSolved,

    #[error("normal matrix is singular; sampling set is not a frame at this level")]
    SingularNormalMatrix,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
