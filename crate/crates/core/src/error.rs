use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty factor list")]
    EmptySpace,
    #[error("invalid factor spec `{0}`")]
    BadFactor(String),
    #[error("negative photon cutoff {0}")]
    NegativeCutoff(i64),
    #[error("unknown basis label {0}")]
    UnknownLabel(String),
    #[error("label {label} has excitation weight {weight} above the sector cap {cap}")]
    SectorViolation {
        label: String,
        weight: usize,
        cap: usize,
    },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("operands live on different spaces")]
    SpaceMismatch,
    #[error("linear combination has zero norm")]
    ZeroNorm,
    #[error("fidelity has non-negligible imaginary part {0:e}")]
    ComplexFidelity(f64),
    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("space does not match the {model} model: {reason}")]
    WrongStructure { model: &'static str, reason: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("eliminated state energy {0:e} too small for adiabatic elimination")]
    SmallEnergy(f64),
    #[error("integration aborted at t = {time}: {reason}")]
    NumericalAbort { time: f64, reason: String },
    #[error("invalid fusion input: {0}")]
    InvalidFusion(String),
}
