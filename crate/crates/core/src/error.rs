use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("angular step of {gap:.3e} rad is not below pi after refinement")]
    StepTooLarge { gap: f64 },
    #[error("path endpoint lies on the slice angle {slice}")]
    SliceHitsEndpoint { slice: f64 },
    #[error("path touches the slice angle {slice} non-transversely")]
    NonGenericSlice { slice: f64 },
    #[error("chart evaluated within {dist:.3e} of its antipode")]
    NearAntipode { dist: f64 },

    #[error("embedding check failed at t = {t}: min self-distance {min_dist:.3e}")]
    EmbeddingCheckFailed { t: f64, min_dist: f64 },
    #[error("families do not share a basepoint: {0}")]
    BasepointMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("sample ({row}, {col}) has norm {norm}, expected a unit vector")]
    UnitSphereViolation { row: usize, col: usize, norm: f64 },
    #[error("first and last time rows differ by {max_diff:.3e}")]
    LoopConditionViolation { max_diff: f64 },

    #[error("Newton iteration did not converge (residual {residual:.3e})")]
    NoConvergence { residual: f64 },
    #[error("collision at t = {t}, z = ({z1}, {z2}) is not transverse: |det| = {det:.3e}")]
    NonTransverse { t: f64, z1: f64, z2: f64, det: f64 },
    #[error("collision candidate collapsed onto the diagonal")]
    SeparationCollapse,
    #[error("collision cluster near t = {t} has incompatible signs")]
    AmbiguousCluster { t: f64 },

    #[error("degree mismatch: lift formula gives {lift}, slice count gives {slice}")]
    DegreeMismatch { lift: i64, slice: i64 },
    #[error("non-integral degree {value} (guard 1e-6)")]
    NonIntegralDegree { value: f64 },

    #[error("presentation has no generators")]
    EmptyGeneratorList,
    #[error("theorem check failed: {0}")]
    TheoremViolated(String),
    /// An invariant that should be a multiple of x² alone is not.
    #[error("expected a multiple of x^2, got {0}")]
    NotPureX2(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Certification failures (as opposed to malformed input).
    pub fn is_certification_failure(&self) -> bool {
        !matches!(
            self,
            Error::Format(_)
                | Error::UnitSphereViolation { .. }
                | Error::LoopConditionViolation { .. }
                | Error::Io(_)
                | Error::InvalidParameter(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
