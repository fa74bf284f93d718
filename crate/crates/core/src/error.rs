use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failures raised by the library. Each variant names one broken
/// precondition; none of them are recoverable by retrying.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max |A - A^H| = {defect:e})")]
    NotHermitian { defect: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue = {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("matrix is not unitary (max |U^H U - 1| = {defect:e})")]
    NotUnitary { defect: f64 },

    #[error("operator is singular{}: min eigenvalue {min_eigenvalue:e} below rank tolerance", fmt_position(*.position))]
    SingularOperator {
        min_eigenvalue: f64,
        position: Option<usize>,
    },

    #[error("phase undefined: overlap {position} has vanishing modulus {modulus:e}")]
    ZeroPhaseUndefined { position: usize, modulus: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("Kraus operators violate completeness (max |sum E^H E - 1| = {defect:e})")]
    CompletenessViolation { defect: f64 },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("unknown channel preset `{0}`")]
    UnknownPreset(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid trajectory index: {0}")]
    InvalidIndex(String),

    #[error("enumeration of {count} trajectories exceeds the cap of {cap}")]
    CombinatorialOverflow { count: u128, cap: u64 },

    #[error("trajectory weight vanished before step {step}; cannot condition further")]
    DeadEnd { step: usize },

    #[error("trajectory set is incomplete: {found} of {expected} index tuples present")]
    IncompleteSet { expected: usize, found: usize },

    #[error("parallelity violated at step {step} (margin {margin:e})")]
    ParallelityViolation { step: usize, margin: f64 },

    #[error("flat interference fringe{}: overlap modulus {modulus:e}", fmt_position(*.step))]
    DegenerateFringe { step: Option<usize>, modulus: f64 },

    #[error("trajectories with undefined phase carry weight {weight:e} > {min_weight:e}")]
    UndefinedPhaseMass { weight: f64, min_weight: f64 },

    #[error("decompositions disagree on channel action by {deviation:e}")]
    ChannelActionMismatch { deviation: f64 },
}

fn fmt_position(position: Option<usize>) -> String {
    match position {
        Some(p) => format!(" at step {p}"),
        None => String::new(),
    }
}

impl Error {
    /// Stable variant name used by the CLI when reporting failures.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NotHermitian { .. } => "NotHermitian",
            Error::NotPsd { .. } => "NotPSD",
            Error::NotUnitary { .. } => "NotUnitary",
            Error::SingularOperator { .. } => "SingularOperator",
            Error::ZeroPhaseUndefined { .. } => "ZeroPhaseUndefined",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NonFinite => "NonFinite",
            Error::CompletenessViolation { .. } => "CompletenessViolation",
            Error::Empty(_) => "Empty",
            Error::UnknownPreset(_) => "UnknownPreset",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::InvalidIndex(_) => "InvalidIndex",
            Error::CombinatorialOverflow { .. } => "CombinatorialOverflow",
            Error::DeadEnd { .. } => "DeadEnd",
            Error::IncompleteSet { .. } => "IncompleteSet",
            Error::ParallelityViolation { .. } => "ParallelityViolation",
            Error::DegenerateFringe { .. } => "DegenerateFringe",
            Error::UndefinedPhaseMass { .. } => "UndefinedPhaseMass",
            Error::ChannelActionMismatch { .. } => "ChannelActionMismatch",
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            Error::SingularOperator { min_eigenvalue, .. } => Error::SingularOperator {
                min_eigenvalue,
                position: Some(step),
            },
            Error::DegenerateFringe { modulus, .. } => Error::DegenerateFringe {
                step: Some(step),
                modulus,
            },
            other => other,
        }
    }
}
