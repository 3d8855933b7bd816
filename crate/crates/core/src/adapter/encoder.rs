use rand::Rng;

use baps_zoo::RngStream;

use crate::{CoreError, Image};

/// Patch side and stride of the encoder projection.
pub const PATCH: usize = 8;

/// Feature grid, stored `[feature][gy][gx]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageEmbedding {
    pub grid_h: usize,
    pub grid_w: usize,
    pub features: usize,
    pub data: Vec<f32>,
}

impl ImageEmbedding {
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.grid_h, self.grid_w, self.features)
    }
}

/// Fixed random stride-8 patch projection followed by `tanh`.
///
/// Weights are drawn once from the seed and never change; the encoder stands
/// in for a pretrained featurizer that the adapter may not modify.
#[derive(Clone, Debug)]
pub struct FrozenEncoder {
    height: usize,
    width: usize,
    channels: usize,
    features: usize,
    // [feature][c][py][px]
    weights: Vec<f32>,
    bias: Vec<f32>,
}

impl FrozenEncoder {
    pub fn new(height: usize, width: usize, channels: usize, features: usize, seed: u64) -> Result<Self, CoreError> {
        if !height.is_multiple_of(PATCH) || !width.is_multiple_of(PATCH) || height == 0 || width == 0 {
            return Err(CoreError::Config(format!(
                "image size {height}x{width} must be a positive multiple of {PATCH}"
            )));
        }
        if features == 0 {
            return Err(CoreError::Config("encoder needs at least one feature".into()));
        }
        let fan_in = channels * PATCH * PATCH;
        let bound = (3.0 / fan_in as f32).sqrt();
        let mut rng = RngStream::new(seed);
        let weights = (0..features * fan_in)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        let bias = (0..features).map(|_| rng.random_range(-0.5f32..=0.5)).collect();
        Ok(Self {
            height,
            width,
            channels,
            features,
            weights,
            bias,
        })
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.height / PATCH, self.width / PATCH)
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn encode(&self, img: &Image) -> Result<ImageEmbedding, CoreError> {
        if img.shape() != (self.height, self.width, self.channels) {
            return Err(CoreError::ShapeMismatch(format!(
                "encoder expects {:?}, got {:?}",
                (self.height, self.width, self.channels),
                img.shape()
            )));
        }
        let (gh, gw) = self.grid();
        let fan_in = self.channels * PATCH * PATCH;
        let mut data = vec![0.0f32; self.features * gh * gw];
        let mut patch = vec![0.0f32; fan_in];
        for gy in 0..gh {
            for gx in 0..gw {
                let mut i = 0;
                for c in 0..self.channels {
                    for py in 0..PATCH {
                        for px in 0..PATCH {
                            patch[i] = img.get(c, gy * PATCH + py, gx * PATCH + px);
                            i += 1;
                        }
                    }
                }
                for f in 0..self.features {
                    let w = &self.weights[f * fan_in..(f + 1) * fan_in];
                    let s: f32 = w.iter().zip(&patch).map(|(a, b)| a * b).sum();
                    data[(f * gh + gy) * gw + gx] = (s + self.bias[f]).tanh();
                }
            }
        }
        Ok(ImageEmbedding {
            grid_h: gh,
            grid_w: gw,
            features: self.features,
            data,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_image_gives_bias_pattern() {
        let enc = FrozenEncoder::new(16, 16, 1, 4, 3).unwrap();
        let img = Image::filled(16, 16, 1, 0.0).unwrap();
        let a = enc.encode(&img).unwrap();
        let b = enc.encode(&img).unwrap();
        assert_eq!(a, b);
        for f in 0..4 {
            let expected = enc.bias[f].tanh();
            assert!(a.data[f * 4..(f + 1) * 4].iter().all(|&v| v == expected));
        }
    }

    #[test]
    fn seed_changes_features() {
        let img = Image::filled(16, 16, 1, 0.4).unwrap();
        let a = FrozenEncoder::new(16, 16, 1, 4, 1).unwrap().encode(&img).unwrap();
        let b = FrozenEncoder::new(16, 16, 1, 4, 2).unwrap().encode(&img).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn default_shape() {
        let enc = FrozenEncoder::new(64, 64, 1, 16, 0).unwrap();
        let e = enc.encode(&Image::filled(64, 64, 1, 0.5).unwrap()).unwrap();
        assert_eq!(e.shape(), (8, 8, 16));
    }

    #[test]
    fn wrong_shape_rejected() {
        let enc = FrozenEncoder::new(16, 16, 1, 4, 0).unwrap();
        assert!(enc.encode(&Image::filled(8, 8, 1, 0.5).unwrap()).is_err());
        assert!(FrozenEncoder::new(12, 16, 1, 4, 0).is_err());
    }
}
