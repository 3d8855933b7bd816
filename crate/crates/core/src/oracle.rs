//! Contract for an opaque prompted segmenter.
//!
//! Callers hand over an image and a point and get a soft mask back. Nothing
//! else crosses this boundary: no weights, no gradients, no internal state
//! beyond a call counter.

use thiserror::Error;

use crate::{Image, PointPrompt, SoftMask};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("point ({x}, {y}) outside the image")]
    PointOutside { x: usize, y: usize },

    #[error("invalid request: {0}")]
    InvalidRequest(String),

    #[error("oracle transport failed: {0}")]
    Transport(#[from] std::io::Error),

    #[error("oracle protocol error: {0}")]
    Protocol(String),

    #[error("oracle reported: {0}")]
    Remote(String),
}

pub trait BlackboxOracle: Send + Sync {
    fn segment(&self, image: &Image, point: PointPrompt) -> Result<SoftMask, OracleError>;

    /// Number of `segment` calls served so far.
    fn call_count(&self) -> u64;
}

impl<T: BlackboxOracle + ?Sized> BlackboxOracle for Box<T> {
    fn segment(&self, image: &Image, point: PointPrompt) -> Result<SoftMask, OracleError> {
        (**self).segment(image, point)
    }

    fn call_count(&self) -> u64 {
        (**self).call_count()
    }
}
