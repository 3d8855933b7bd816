//! Building blocks of the blackbox adaptation pipeline.
//!
//! * [`image`]: images, point prompts and masks.
//! * [`oracle`]: the only contract through which a prompted segmenter is seen.
//! * [`metrics`]: BCE + Dice training loss, Dice score and HD95.
//! * [`adapter`]: frozen encoder, prompt embedding, trainable decoder that
//!   emits a bounded residual visual prompt, and the shared-prompt baseline.
//! * [`dataset`]: synthetic prompted-segmentation data and augmentation.

pub mod adapter;
pub mod dataset;
mod error;
pub mod image;
pub mod metrics;
pub mod oracle;

pub use error::CoreError;
pub use image::{BinaryMask, Image, PointPrompt, SoftMask};
pub use oracle::{BlackboxOracle, OracleError};
