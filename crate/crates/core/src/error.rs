use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("space mismatch: {left} vs {right}")]
    SpaceMismatch { left: String, right: String },

    #[error("basis label does not fit the space: {0}")]
    InvalidLabel(String),

    #[error("cannot normalize a zero vector")]
    ZeroVector,

    #[error("state is not normalized (norm = {norm})")]
    NotNormalized { norm: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("operator is not Hermitian: {0}")]
    NotHermitian(String),

    #[error("Krylov propagation did not converge (residual estimate {residual:.3e})")]
    KrylovNoConvergence { residual: f64 },

    #[error("dimension {dimension} exceeds the cap of {cap}")]
    DimensionCap { dimension: usize, cap: usize },

    #[error("finite gauge tolerances require gauge generators")]
    MissingGaugeGenerators,

    #[error("empty window: {0}")]
    EmptyWindow(String),

    #[error("derivative stencil leaves the spectrum at energy density {density}")]
    StencilOutsideSpectrum { density: f64 },

    #[error("all filter weights vanish")]
    VanishingWeights,

    #[error("step {step} at t = {time}: {source}")]
    Step {
        step: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
