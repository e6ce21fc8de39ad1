use num_complex::Complex64;
use thiserror::Error;

/// Best iterate returned when the eigenvalue iteration gives up.
#[derive(Debug, Clone, PartialEq)]
pub struct Unconverged {
    pub energy: Complex64,
    pub residue: f64,
    pub iterations: usize,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("contour crosses the branch cut near x = {0}")]
    CutViolation(Complex64),

    #[error("no turning point inside the wedge of family {0}")]
    NoTurningPointInWedge(u32),

    #[error("WKB estimate undefined: {0}")]
    Domain(String),

    #[error("contours do not share endpoints")]
    EndpointMismatch,

    #[error("contours overlap along a segment")]
    DegenerateOverlap,

    #[error("unknown contour kind `{0}`")]
    UnknownContour(String),

    #[error("solution overflowed at p = {0}")]
    Overflow(f64),

    #[error("trajectory norm is zero or not finite")]
    ZeroNorm,

    #[error("trajectories are sampled on different grids")]
    GridMismatch,

    #[error("singular normal equations")]
    SingularNormalEquations,

    #[error(
        "no convergence after {} iterations (best E = {} , residue {:.3e})",
        .0.iterations, .0.energy, .0.residue
    )]
    NotConverged(Unconverged),

    #[error("line tracing stalled near x = {0}")]
    TracingStall(Complex64),

    #[error("levels {0} and {1} never merged in the scanned range")]
    NoMerger(usize, usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_finite(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(format!("{name} = {v}")))
    }
}
