use thiserror::Error;

/// Errors produced by the texture-space library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("signal too short: {len} samples, need at least {min}")]
    SignalTooShort { len: usize, min: usize },

    #[error("cannot normalize an all-zero signal")]
    SilentSignal,

    #[error("spectrum has no energy in {lo_hz}..{hi_hz} Hz")]
    ZeroSpectrum { lo_hz: f64, hi_hz: f64 },

    #[error("no spectral peak above the noise floor: {0}")]
    NoPeak(String),

    #[error("input does not excite the {lo_hz}..{hi_hz} Hz band")]
    InsufficientExcitation { lo_hz: f64, hi_hz: f64 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid session: {0}")]
    InvalidSession(String),

    #[error("round {round} does not assign textures {missing:?}")]
    MissingTextures { round: u8, missing: Vec<u32> },

    #[error("sessions cover different texture sets")]
    MismatchedTextureSets,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("infeasible group counts: {0}")]
    InfeasibleGroupCounts(String),

    #[error("configuration is rank deficient")]
    RankDeficient,

    #[error("zero-length vector `{0}`")]
    ZeroVector(String),

    #[error("column `{0}` has zero variance")]
    ZeroVariance(String),

    #[error("session state: {0}")]
    SessionState(String),

    #[error("unknown texture id {0}")]
    UnknownTexture(u32),

    #[error("wav encoding failed: {0}")]
    Wav(#[from] hound::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
