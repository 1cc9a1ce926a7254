//! Execution monitoring: frame sampling, grid composition and the detection
//! query/response loop.

mod detect;
mod frame;
mod grid;
mod query;
mod sample;

pub use detect::{detect, DetectConfig};
pub use frame::{load_frames_dir, sha256_hex, Frame};
pub use grid::{compose_grid, fit, GridSpec, ImageGrid};
pub use query::{
    build_detection_query, parse_detection_response, DetectionContext, DetectionMode,
    DetectionParseError, FailureReport, Visual,
};
pub use sample::{sample_frames, SamplingPolicy};

use crate::fm::ProviderError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MonitorError {
    #[error("bad frame: {0}")]
    BadFrame(String),
    #[error("{0}")]
    Io(String),
    #[error("duration must be positive, got {0}")]
    BadDuration(f64),
    #[error("no frames")]
    NoFrames,
    #[error("{frames} frames do not fit a grid of {capacity} cells")]
    GridCapacity { frames: usize, capacity: usize },
    #[error("detector: {0}")]
    Provider(#[from] ProviderError),
    #[error("unreadable detection response: {0}")]
    Parse(#[from] DetectionParseError),
}
