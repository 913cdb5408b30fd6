use thiserror::Error;

/// Errors raised by the scene model, the renderer inputs and the samplers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("image is {got_width}x{got_height} but intrinsics expect {want_width}x{want_height}")]
    DimensionMismatch {
        got_width: usize,
        got_height: usize,
        want_width: usize,
        want_height: usize,
    },
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("voxel grid is empty")]
    EmptyGrid,
    #[error("rendered image has no foreground pixels")]
    EmptyRender,
    #[error("voxel resolution must be positive, got {0}")]
    InvalidResolution(f64),
    #[error("contact face must be in 1..=6, got {0}")]
    InvalidFace(u8),
    #[error("contact parameters out of range: {0}")]
    ContactOutOfRange(String),
    #[error("object library is empty")]
    EmptyLibrary,
    #[error("unknown object id {0}")]
    UnknownObject(usize),
    #[error("invalid noise parameters: {0}")]
    InvalidNoise(String),
    #[error("invalid camera prior: {0}")]
    InvalidCameraPrior(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("no latent configuration has positive prior mass")]
    EmptySupport,
    #[error("all particle weights are zero")]
    DegenerateWeights,
    #[error("particles carry {got} objects, expected {expected}")]
    ParticleArity { expected: usize, got: usize },
    #[error("mean resultant length is 1; concentration is unbounded (mean direction {mean_direction})")]
    DegenerateConcentration { mean_direction: f64 },
    #[error("sum of weights must be positive")]
    NonPositiveWeights,
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("no frames to process")]
    NoFrames,
    #[error("malformed {format} data: {reason}")]
    Format { format: &'static str, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
