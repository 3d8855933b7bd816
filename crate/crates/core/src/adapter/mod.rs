//! Visual-prompt adapter.
//!
//! `image → frozen encoder → G×G×F features`, `point → sinusoidal embedding`,
//! both concatenated per grid cell and upsampled by a transposed-convolution
//! decoder into a residual prompt bounded by `±γ`. The residual is added to
//! the image before the image is handed to the blackbox segmenter.

mod checkpoint;
mod decoder;
mod encoder;
mod prompt;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_HEADER_LEN, CHECKPOINT_MAGIC};
pub use decoder::{DecoderArch, DecoderWeights, StageWeights};
pub use encoder::{FrozenEncoder, ImageEmbedding, PATCH};
pub use prompt::{embed_prompt, PromptEmbedding};

use crate::{CoreError, Image};

/// Default residual amplitude.
pub const DEFAULT_GAMMA: f32 = 0.2;

/// Per-pixel residual with the same shape as the image it is added to.
#[derive(Clone, Debug, PartialEq)]
pub struct VisualPrompt {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl VisualPrompt {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub(crate) fn from_raw(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), height * width * channels);
        Self {
            height,
            width,
            channels,
            data,
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn max_abs(&self) -> f32 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `clamp(image + prompt, 0, 1)`.
pub fn apply_prompt(img: &Image, vp: &VisualPrompt) -> Result<Image, CoreError> {
    if img.shape() != vp.shape() {
        return Err(CoreError::ShapeMismatch(format!(
            "image {:?} vs prompt {:?}",
            img.shape(),
            vp.shape()
        )));
    }
    let data = img.data().iter().zip(&vp.data).map(|(a, b)| a + b).collect();
    Image::from_clamped(img.height(), img.width(), img.channels(), data)
}

/// Input-independent prompt `γ·tanh(shared)` reshaped to `H×W×C`.
pub fn vpt_prompt(
    shared: &[f64],
    height: usize,
    width: usize,
    channels: usize,
    gamma: f32,
) -> Result<VisualPrompt, CoreError> {
    let n = height * width * channels;
    if shared.len() != n {
        return Err(CoreError::ShapeMismatch(format!(
            "shared prompt has {} values, expected {n}",
            shared.len()
        )));
    }
    if shared.iter().any(|&v| !(v as f32).is_finite()) {
        return Err(CoreError::NonFiniteWeights);
    }
    let data = shared.iter().map(|&v| gamma * (v as f32).tanh()).collect();
    Ok(VisualPrompt::from_raw(height, width, channels, data))
}
