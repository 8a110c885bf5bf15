use thiserror::Error;

/// Errors raised across the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported dimension {dim}: {context}")]
    UnsupportedDimension { dim: usize, context: &'static str },

    #[error("gradient unavailable for {0} potential")]
    GradientUnavailable(&'static str),

    #[error("potential is not differentiable at the probe point")]
    NotDifferentiable,

    #[error("integrability guard: smallest eigenvalue of I + Q is {min_eigenvalue:.3e} (< {floor:.0e})")]
    Integrability { min_eigenvalue: f64, floor: f64 },

    #[error("tail guard: e^psi mass is not negligible at the edge of the rule ({decay:.1} nats of decay)")]
    TailGuard { decay: f64 },

    #[error("Gaussian integral underflowed: every sampled value of the exponent is -inf")]
    Underflow,

    #[error("overflow: +inf reached while evaluating {0}")]
    Overflow(&'static str),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("empty domain: the input has no finite values")]
    EmptyDomain,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("polygon is not strictly convex and counterclockwise at vertex {0}")]
    NotConvex(usize),

    #[error("origin is not strictly inside the polygon")]
    OriginOutside,

    #[error("centering hypothesis violated: |barycenter| = {norm:.3e} > {tol:.0e}")]
    Centering { norm: f64, tol: f64 },

    #[error("non-finite drift at path {path}, step {step}")]
    NonFiniteDrift { path: usize, step: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("feasibility violated: phi(x) + psi(y) exceeds c|x-y|^2 by {excess:.3e}")]
    Feasibility { excess: f64 },

    #[error("size guard: {what} would need {bytes} bytes (limit {limit})")]
    SizeGuard { what: &'static str, bytes: u64, limit: u64 },

    #[error("unknown catalog id `{0}`")]
    UnknownId(String),

    #[error("cannot parse `{input}`: {reason}")]
    Parse { input: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
