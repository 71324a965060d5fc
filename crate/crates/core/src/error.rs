use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of a map.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate frame: smallest singular value {smallest:e} below {threshold:e} x largest")]
    DegenerateFrame { smallest: f64, threshold: f64 },

    #[error("degree mismatch: expected {expected}, found {found}")]
    DegreeMismatch { expected: i32, found: i32 },

    #[error("parity mismatch: {0}")]
    Parity(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("pole of factor {factor} too close to the contour: margin {margin:e} < threshold {threshold:e}")]
    PoleTooClose { factor: usize, margin: f64, threshold: f64 },

    #[error("rank-deficient design matrix: rank {rank} < {cols} columns; null combination {null_combination:?}")]
    RankDeficient {
        rank: usize,
        cols: usize,
        null_combination: Vec<f64>,
    },

    #[error("insufficient frames: {got} given, at least {required} required")]
    InsufficientFrames { required: usize, got: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
