use std::path::PathBuf;

/// Errors produced by the fusion library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("patch exceeds image bounds: origin ({x}, {y}), size {size}, image {width}x{height}")]
    PatchOutOfBounds {
        x: usize,
        y: usize,
        size: usize,
        width: usize,
        height: usize,
    },

    #[error("image {width}x{height} is smaller than patch size {size}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        size: usize,
    },

    #[error("uncovered pixels: first at ({x}, {y}) in channel {channel}")]
    UncoveredPixel { x: usize, y: usize, channel: usize },

    #[error("expected {expected} channels, got {actual}")]
    ChannelCount { expected: usize, actual: usize },

    #[error("channel index {channel} out of range for {channels}-channel image")]
    ChannelIndex { channel: usize, channels: usize },

    #[error("size mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("image dimensions differ: {0}x{1}x{2} vs {3}x{4}x{5}")]
    DimensionMismatch(usize, usize, usize, usize, usize, usize),

    #[error("patches in a fusion set do not share origin and size")]
    PatchSetMismatch,

    #[error("exposure sequence is empty")]
    EmptySequence,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("{path}: unsupported pixel format {format}; expected 8- or 16-bit grayscale or RGB")]
    UnsupportedFormat { path: PathBuf, format: String },
}

pub type Result<T> = std::result::Result<T, Error>;
