use std::io;

use thiserror::Error;

/// Errors produced by the stroke-field pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("malformed graymap: {0}")]
    Format(String),

    #[error("raster not thinned: pixel ({x}, {y}) has {neighbors} stroke neighbors")]
    NotThinned { x: usize, y: usize, neighbors: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown sub-stroke id {0}")]
    UnknownSubstroke(u32),

    #[error("missing orientation at stroke pixel ({x}, {y})")]
    MissingOrientation { x: usize, y: usize },

    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    Dimensions {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("kernel half-extent {half_extent} does not cover a {width}x{height} field")]
    KernelTooSmall {
        half_extent: usize,
        width: usize,
        height: usize,
    },

    #[error("empty mask")]
    EmptyMask,

    #[error("brute force over {0} sub-strokes exceeds the limit of {max}", max = crate::repulsion::BRUTE_FORCE_MAX)]
    TooManySubstrokes(usize),

    #[error("extended stroke is self-intersecting")]
    SelfIntersecting,

    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),

    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
