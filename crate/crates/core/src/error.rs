use thiserror::Error;

/// Errors raised by the measure, metric, symmetry, extraction and allocation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("shift {0:?} is not a multiple of the cell width")]
    NonGridShift(Vec<f64>),
    #[error("resolution {r} does not divide grid size {n}")]
    BadResolution { r: usize, n: usize },
    #[error("invalid quantization step {0}")]
    BadStep(f64),
    #[error("direction not representable on the grid: {0}")]
    IncompatibleDirection(String),
    #[error("measures live on different geometries")]
    GeometryMismatch,
    #[error("total masses differ: {0} vs {1}")]
    TotalMassMismatch(f64, f64),
    #[error("measure has zero total mass")]
    ZeroMass,
    #[error("no grid vector lies in the shell [{inner}, {outer}]")]
    ShellUnresolvable { inner: f64, outer: f64 },
    #[error("measure has an invariant direction (dimension {0})")]
    HasInvariantDirection(usize),
    #[error("no epsilon of the form 1/M with M <= {m_max} lies below the shell distance")]
    EpsilonNotFound { m_max: u32 },
    #[error("no translate passes the separation test")]
    NoCandidate,
    #[error("occupancy set is empty")]
    EmptyOccupancy,
    #[error("occupancy pair at distance {distance} lies in the forbidden annulus [{inner}, {outer}]")]
    KeyPropertyViolation {
        distance: f64,
        inner: f64,
        outer: f64,
    },
    #[error("point pattern is empty")]
    EmptyPattern,
    #[error("source measure has atoms")]
    NotDiffuse,
    #[error("cell totals differ: {0} vs {1}")]
    MassMismatch(f64, f64),
    #[error("basis is degenerate")]
    DegenerateBasis,
    #[error("chart does not match the allocation: {0}")]
    ChartMismatch(String),
    #[error("a fiber of the invariant subspace carries an atom of the projected source")]
    FiberAtom,
    #[error("measures have full invariance but are not uniform")]
    NotUniform,
    #[error("bad lattice: {0}")]
    BadLattice(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
