use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("step law masses sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },
    #[error("invalid step law: {0}")]
    InvalidLaw(String),
    #[error("invalid cone: {0}")]
    InvalidCone(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("generating function overflow; shrink the tilt")]
    Overflow,
    #[error("rate function is unbounded: point lies outside the convex hull of the support")]
    Unbounded,
    #[error("window contains no usable lattice points")]
    EmptyWindow,
    #[error("window has {points} points, above the cap of {cap}")]
    WindowTooLarge { points: usize, cap: usize },
    #[error("point lies outside the cone")]
    Outside,
    #[error("solver did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("step law has a singular covariance")]
    DegenerateLaw,
    #[error("step law has zero mean")]
    ZeroDrift,
    #[error("gradient vanishes at the given tilt")]
    CriticalPoint,
    #[error("window too small: mass returning from the window edge bounded by {bound}")]
    WindowTooSmall { bound: f64 },
    #[error("horizon cap exceeded at {horizon} steps")]
    HorizonCap { horizon: usize },
    #[error("Green function denominator below 1e-300")]
    ZeroDenominator,
    #[error("no cone lattice point near the requested ray point")]
    NoLatticePoint,
    #[error("direction does not lie in the cone")]
    QNotInCone,
    #[error("kernel entry {value} is negative")]
    NegativeKernel { value: f64 },
    #[error("renewal series did not contract within {iterations} iterations")]
    NonContracting { iterations: usize },
    #[error("simulation cap of {steps} steps exhausted")]
    CapExhausted { steps: u64 },
    #[error("mean step does not point into the cone interior")]
    DriftNotInCone,
    #[error("no interior points to check")]
    NoInteriorPoints,
    #[error("no valid sample pairs")]
    NoValidPairs,
    #[error("hypergeometric series did not converge at t = {t}")]
    NonConvergent { t: f64 },
    #[error("no zero of h found in [0, pi)")]
    NoZeroFound,
    #[error("step law covariance is not isotropic")]
    AnisotropicCovariance,
    #[error("step law is not centered")]
    NotCentered,
    #[error("only {survivors} trials survived to t_max/4")]
    TooFewSurvivors { survivors: u64 },
    #[error("unknown suite `{0}`")]
    UnknownSuite(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable identifier written into run manifests.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::NotNormalized { .. } => "not-normalized",
            Error::InvalidLaw(_) => "invalid-law",
            Error::InvalidCone(_) => "invalid-cone",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Overflow => "overflow",
            Error::Unbounded => "unbounded",
            Error::EmptyWindow => "empty-window",
            Error::WindowTooLarge { .. } => "window-too-large",
            Error::Outside => "outside",
            Error::NoConvergence { .. } => "no-convergence",
            Error::DegenerateLaw => "degenerate-law",
            Error::ZeroDrift => "zero-drift",
            Error::CriticalPoint => "critical-point",
            Error::WindowTooSmall { .. } => "window-too-small",
            Error::HorizonCap { .. } => "horizon-cap",
            Error::ZeroDenominator => "zero-denominator",
            Error::NoLatticePoint => "no-lattice-point",
            Error::QNotInCone => "q-not-in-cone",
            Error::NegativeKernel { .. } => "negative-kernel",
            Error::NonContracting { .. } => "non-contracting",
            Error::CapExhausted { .. } => "cap-exhausted",
            Error::DriftNotInCone => "drift-not-in-cone",
            Error::NoInteriorPoints => "no-interior-points",
            Error::NoValidPairs => "no-valid-pairs",
            Error::NonConvergent { .. } => "non-convergent",
            Error::NoZeroFound => "no-zero-found",
            Error::AnisotropicCovariance => "anisotropic-covariance",
            Error::NotCentered => "not-centered",
            Error::TooFewSurvivors { .. } => "too-few-survivors",
            Error::UnknownSuite(_) => "unknown-suite",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }

    /// Errors caused by bad input rather than by a numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::NotNormalized { .. }
                | Error::InvalidLaw(_)
                | Error::InvalidCone(_)
                | Error::InvalidArgument(_)
                | Error::Outside
                | Error::QNotInCone
                | Error::DriftNotInCone
                | Error::AnisotropicCovariance
                | Error::NotCentered
                | Error::UnknownSuite(_)
                | Error::Parse(_)
                | Error::DegenerateLaw
                | Error::ZeroDrift
                | Error::WindowTooLarge { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
