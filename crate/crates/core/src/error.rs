use std::fmt;

/// A single failed invariant found while validating a lattice definition.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    SingularBasis { det: f64 },
    DimensionMismatch { what: String, expected: usize, found: usize },
    UnknownJoint { bar: usize, joint: usize },
    ZeroLengthBar { bar: usize },
    NonOrthonormalDirectors { bar: usize, deviation: f64 },
    SpanMismatch { bar: usize, deviation: f64 },
    InvalidSection { bar: usize, reason: String },
    UnsupportedKinematics { name: String, dimension: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::SingularBasis { det } => write!(f, "SingularBasis: |det| = {det:e}"),
            Violation::DimensionMismatch { what, expected, found } => {
                write!(f, "DimensionMismatch: {what} has {found} components, expected {expected}")
            }
            Violation::UnknownJoint { bar, joint } => {
                write!(f, "UnknownJoint: bar {bar} references joint class {joint}")
            }
            Violation::ZeroLengthBar { bar } => write!(f, "ZeroLengthBar: bar {bar}"),
            Violation::NonOrthonormalDirectors { bar, deviation } => {
                write!(f, "NonOrthonormalDirectors: bar {bar} (deviation {deviation:e})")
            }
            Violation::SpanMismatch { bar, deviation } => write!(
                f,
                "SpanMismatch: bar {bar} span rebuilt from shifts/offsets differs from stored geometry (relative {deviation:e})"
            ),
            Violation::InvalidSection { bar, reason } => {
                write!(f, "InvalidSection: bar {bar}: {reason}")
            }
            Violation::UnsupportedKinematics { name, dimension } => {
                write!(f, "UnsupportedKinematics: '{name}' in dimension {dimension}")
            }
        }
    }
}

/// Non-fatal findings reported alongside a valid lattice.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    DanglingJointClass { joint: usize },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::DanglingJointClass { joint } => {
                write!(f, "DanglingJointClass: joint class {joint} is not referenced by any bar")
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid lattice: {}", join(.0))]
    Validation(Vec<Violation>),
    #[error("singular basis (|det| = {0:e})")]
    SingularBasis(f64),
    #[error("{what} index {index} out of range (count {count})")]
    IndexOutOfRange { what: &'static str, index: usize, count: usize },
    #[error("nonpositive beam length {0}")]
    NonpositiveLength(f64),
    #[error("directors are not orthonormal (deviation {0:e})")]
    NonOrthonormalDirectors(f64),
    #[error("wavevector {0:?} lies outside the Brillouin zone after scaling")]
    WavevectorOutsideBZ(Vec<f64>),
    #[error("zero wavevector")]
    ZeroWavevector,
    #[error("singular continuum limit at k = {k:?}: {reason}")]
    SingularLimit { k: Vec<f64>, reason: String },
    #[error("extrapolation did not converge (residual {residual:e} > tolerance {tolerance:e})")]
    NoConvergence { residual: f64, tolerance: f64 },
    #[error("micropolar representation does not fit (relative residual {residual:e} > {tolerance:e})")]
    RepresentationFailure { residual: f64, tolerance: f64 },
    #[error("ill-conditioned moduli fit (normal-equation condition number {0:e})")]
    IllConditionedFit(f64),
    #[error("operation requires a single joint class, lattice has {0}")]
    UnsupportedJointCount(usize),
    #[error("unsupported kinematics '{0}' for this operation")]
    UnsupportedKinematics(String),
    #[error("no bar fits inside the domain")]
    EmptyStructure,
    #[error("unbalanced load (rigid-mode component {0:e})")]
    UnbalancedLoad(f64),
    #[error("dynamical matrix is singular at k = {0:?} (mechanism)")]
    SingularMode(Vec<f64>),
    #[error("singular stiffness: {0}")]
    SingularSystem(String),
    #[error("oracle is singular: {0}")]
    SingularOracle(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad input rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Validation(_)
                | Error::SingularBasis(_)
                | Error::IndexOutOfRange { .. }
                | Error::NonpositiveLength(_)
                | Error::NonOrthonormalDirectors(_)
                | Error::InvalidParameter(_)
                | Error::Json(_)
                | Error::Io(_)
        )
    }
}

fn join(violations: &[Violation]) -> String {
    violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
