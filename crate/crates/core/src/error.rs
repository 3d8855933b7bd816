use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("point ({x}, {y}) outside {width}x{height} image")]
    PointOutside {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },

    #[error("mask has no foreground pixels")]
    EmptyMask,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite decoder weights")]
    NonFiniteWeights,

    #[error("malformed file: {0}")]
    Format(String),

    #[error("generation failed: {0}")]
    Generation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
