use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures raised while building the radial graph from a template and seed.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("template needs at least 3 markers, got {0}")]
    TooFewMarkers(usize),
    #[error("non-finite coordinate in {0}")]
    NonFinite(&'static str),
    #[error("seed point ({x}, {y}) lies outside the template")]
    SeedOutsideTemplate { x: f64, y: f64 },
    #[error("ray {ray} is degenerate: length {length:.3} below 2 pixel units")]
    DegenerateRay { ray: usize, length: f64 },
    #[error("ray at angle {angle:.6} rad does not hit the template")]
    NoIntersection { angle: f64 },
}

impl GeometryError {
    pub fn reason(&self) -> &'static str {
        match self {
            GeometryError::TooFewMarkers(_) => "too-few-markers",
            GeometryError::NonFinite(_) => "non-finite-coordinate",
            GeometryError::SeedOutsideTemplate { .. } => "seed-outside-template",
            GeometryError::DegenerateRay { .. } => "degenerate-ray",
            GeometryError::NoIntersection { .. } => "no-intersection",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("nrrd parse error at line {line} ({text:?}): {msg}")]
    Parse { line: usize, text: String, msg: String },
    #[error("unsupported format: {0}")]
    Unsupported(String),
    #[error("truncated payload: expected {expected} voxels, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("contour set schema error at {path}: {msg}")]
    Schema { path: String, msg: String },
    #[error("index {index} out of range 0..{len}")]
    Index { index: i64, len: usize },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("illegal session state: {0}")]
    State(String),
    #[error("degenerate cut on slice {z}: area {area:.3} below 2 voxel units, redraw the template")]
    DegenerateCut { z: usize, area: f64 },
    #[error("no bracketing contours for slices {0:?}")]
    Interpolation(Vec<usize>),
    #[error("invalid phantom spec: {0}")]
    Spec(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable tag, used by the HTTP layer and the CLI diagnostics.
    pub fn reason(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse-error",
            Error::Unsupported(_) => "unsupported-format",
            Error::Truncated { .. } => "truncated-payload",
            Error::Schema { .. } => "schema-violation",
            Error::Index { .. } => "index-out-of-range",
            Error::Argument(_) => "invalid-argument",
            Error::Geometry(g) => g.reason(),
            Error::State(_) => "illegal-state",
            Error::DegenerateCut { .. } => "degenerate-cut",
            Error::Interpolation(_) => "orphan-slices",
            Error::Spec(_) => "invalid-spec",
            Error::Internal(_) => "internal-invariant",
            Error::Io(_) => "io-error",
        }
    }

    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Internal(_))
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
