use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("distance {distance:e} m is below the singularity guard {r_min:e} m")]
    ZeroDistance { distance: f64, r_min: f64 },

    #[error("R_z = {rz:e} m is not in front of the aperture (R_z < 0 required)")]
    WrongBranch { rz: f64 },

    #[error("finite-difference stencil crosses the aperture plane (R_z = {rz:e} m, reach {reach:e} m)")]
    StencilCrossesPlane { rz: f64, reach: f64 },

    #[error("evanescent tail bound {tail:e} exceeds tolerance {limit:e}")]
    TruncationInsufficient { tail: f64, limit: f64 },

    #[error("in-plane shift required, got offset z = {0:e} m")]
    NonPlanarShift(f64),

    #[error("scatterer {index} lies on the aperture (distance {distance:e} m)")]
    ScattererOnAperture { index: usize, distance: f64 },

    #[error("frequency lists differ")]
    FrequencyMismatch,

    #[error("pairing modes differ")]
    PairingMismatch,

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("image is identically zero")]
    EmptyImage,

    #[error("target mask is empty")]
    EmptyMask,

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("validation error: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
