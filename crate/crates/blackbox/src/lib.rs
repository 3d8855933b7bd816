//! A deterministic point-prompted segmenter used as the frozen "foundation
//! model". Callers only ever see it through [`BlackboxOracle`]: an image and a
//! point go in, a soft mask comes out.
//!
//! Mechanism: average channels, Gaussian-blur, flood-fill the connected
//! region whose blurred intensity is within `τ` of the seed's, and report a
//! confidence that falls off linearly with the intensity gap.

mod grower;
mod wire;

pub use grower::{segment, GrowerParams};
pub use wire::{serve, SubprocessOracle};

use std::sync::atomic::{AtomicU64, Ordering};

use baps_core::{BlackboxOracle, Image, OracleError, PointPrompt, SoftMask};

struct SimulatedSegmenter {
    params: GrowerParams,
    calls: AtomicU64,
}

impl BlackboxOracle for SimulatedSegmenter {
    fn segment(&self, img: &Image, point: PointPrompt) -> Result<SoftMask, OracleError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        segment(img, point, &self.params)
    }

    fn call_count(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

/// Builds an oracle around `params`. The returned handle exposes only the
/// oracle contract; the parameters cannot be read back.
pub fn make_oracle(params: GrowerParams) -> Box<dyn BlackboxOracle> {
    Box::new(SimulatedSegmenter {
        params,
        calls: AtomicU64::new(0),
    })
}
