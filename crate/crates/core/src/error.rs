use thiserror::Error;

/// Errors raised by the discretization, assembly and solver layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("point {value} outside domain [{lo}, {hi}]")]
    OutOfDomain { value: f64, lo: f64, hi: f64 },

    #[error("unsupported degree {degree}: {reason}")]
    UnsupportedDegree { degree: usize, reason: String },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("assembly failed: {0}")]
    Assembly(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("newton iteration diverged at iteration {iteration} (residual {residual:e})")]
    Diverged { iteration: usize, residual: f64 },

    #[error("newton iteration did not converge in {iterations} iterations (residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },

    #[error("continuation stage {stage} (Re = {reynolds}) failed: {source}")]
    Continuation {
        stage: usize,
        reynolds: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed data at line {line}: {message}")]
    MalformedData { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, got })
    }
}
