use crate::forms::ValidationReport;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("triple validation failed:\n{0}")]
    TripleInvalid(ValidationReport),

    #[error("shifted form not coercive at lambda={lambda}, tau={tau} (pivot estimate {min_eig_estimate:.6e})")]
    NotCoercive {
        lambda: f64,
        tau: f64,
        min_eig_estimate: f64,
    },

    #[error("no coercive shift found at lambda={lambda} for tau up to 2^60")]
    ShiftSearchExceeded { lambda: f64 },

    #[error("eigensolver failed: {0}")]
    EigenFailure(String),

    #[error(
        "ambiguous resonance: mu_{index}={value} lies within (tol, 10*tol] of mu={mu} (tol={tol:.3e}); refine tol"
    )]
    AmbiguousResonance {
        index: usize,
        value: f64,
        mu: f64,
        tol: f64,
    },

    #[error("resonance detected at mu={mu}: matched indices {indices:?}")]
    ResonanceDetected { mu: f64, indices: Vec<usize> },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("resonant problem not solvable: defect={defect:.6e}")]
    NotSolvable { defect: f64 },

    #[error("picard iteration not contracting: difference ratio {ratio:.4} for 5 consecutive steps")]
    PicardNotContracting { ratio: f64 },

    #[error("maximum iteration count {0} exceeded")]
    MaxIterExceeded(usize),

    #[error("newton iteration diverged after {iterations} steps: {reason}")]
    NewtonDiverged { iterations: usize, reason: String },

    #[error("lambda operator fails injectivity check (condition estimate {0:.6e})")]
    InjectivityFailed(f64),

    #[error("no bifurcation root found from {starts} multi-start points")]
    BifurcationRootNotFound { starts: usize },

    #[error("root bracketing failed: {0}")]
    RootBracketFailed(String),

    #[error("incompatible coefficients: {0}")]
    IncompatibleCoefficients(String),

    #[error("mesh too coarse: {0} elements (need at least 2)")]
    MeshTooCoarse(usize),

    #[error("density positivity violated: {0}")]
    PositivityViolated(String),

    #[error("invalid power exponent p={0} (need p > 2)")]
    InvalidExponent(f64),

    #[error("eigencurve trace failed at lambda={lambda}: {source}")]
    EigencurvePoint {
        lambda: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
