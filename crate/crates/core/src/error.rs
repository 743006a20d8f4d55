use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate rotation: quaternion has zero norm")]
    DegenerateRotation,
    #[error("singular 2-D covariance (determinant {0:e})")]
    SingularCovariance(f64),
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("exposure time must be positive, got {0}")]
    NonPositiveExposure(f64),
    #[error("need at least two distinct exposure times, got {0}")]
    DegenerateExposures(usize),
    #[error("HDR value must be positive, got {0}")]
    NonPositiveRadiance(f64),
    #[error("grid configuration: {0}")]
    GridConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("image is {width}x{height}, smaller than the {window}x{window} SSIM window")]
    ImageTooSmall {
        width: usize,
        height: usize,
        window: usize,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid dataset: {0}")]
    Dataset(String),
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("failed to decode image {path}: {source}")]
    ImageDecode {
        path: PathBuf,
        #[source]
        source: ::image::ImageError,
    },
    #[error("failed to encode image {path}: {source}")]
    ImageEncode {
        path: PathBuf,
        #[source]
        source: ::image::ImageError,
    },
    #[error("unsupported dataset version {found} (this build reads version {expected})")]
    Version { found: u32, expected: u32 },
    #[error("dimension mismatch in {path}: expected {expected:?}, found {found:?}")]
    Dimension {
        path: PathBuf,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("malformed PFM: {0}")]
    Pfm(String),
    #[error("big-endian PFM files are not supported")]
    PfmBigEndian,
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error("non-finite loss at iteration {iteration}: {detail}")]
    NonFiniteLoss { iteration: usize, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
