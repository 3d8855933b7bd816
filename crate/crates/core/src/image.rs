//! Planar image and mask containers.
//!
//! Pixel storage is channel-major: `data[c * H * W + y * W + x]`.

use crate::CoreError;

#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self, CoreError> {
        if height == 0 || width == 0 {
            return Err(CoreError::ShapeMismatch("image must be non-empty".into()));
        }
        if channels != 1 && channels != 3 {
            return Err(CoreError::ShapeMismatch(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(CoreError::ShapeMismatch(format!(
                "expected {} values for {height}x{width}x{channels}, got {}",
                height * width * channels,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(CoreError::OutOfRange(format!("pixel value {v} not in [0, 1]")));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Result<Self, CoreError> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    /// Per-pixel mean over channels.
    pub fn channel_mean(&self) -> Vec<f32> {
        if self.channels == 1 {
            return self.data.clone();
        }
        let n = self.height * self.width;
        let inv = 1.0 / self.channels as f32;
        (0..n)
            .map(|i| (0..self.channels).map(|c| self.data[c * n + i]).sum::<f32>() * inv)
            .collect()
    }

    /// Builds an image from arbitrary values, clamping each into `[0, 1]`.
    pub fn from_clamped(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self, CoreError> {
        let data = data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Self::new(height, width, channels, data)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PointPrompt {
    pub x: usize,
    pub y: usize,
}

impl PointPrompt {
    pub fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    pub fn check_inside(&self, height: usize, width: usize) -> Result<(), CoreError> {
        if self.x < width && self.y < height {
            Ok(())
        } else {
            Err(CoreError::PointOutside {
                x: self.x,
                y: self.y,
                width,
                height,
            })
        }
    }
}

/// Per-pixel confidence in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftMask {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl SoftMask {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self, CoreError> {
        if data.len() != height * width || height == 0 || width == 0 {
            return Err(CoreError::ShapeMismatch(format!(
                "soft mask {height}x{width} with {} values",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(CoreError::OutOfRange(format!("mask value {v} not in [0, 1]")));
        }
        Ok(Self { height, width, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.data[y * self.width + x]
    }

    pub fn binarize(&self, threshold: f32) -> BinaryMask {
        BinaryMask {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| u8::from(v >= threshold)).collect(),
        }
    }
}

impl From<&BinaryMask> for SoftMask {
    fn from(m: &BinaryMask) -> Self {
        SoftMask {
            height: m.height,
            width: m.width,
            data: m.data.iter().map(|&v| f32::from(v)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self, CoreError> {
        if data.len() != height * width || height == 0 || width == 0 {
            return Err(CoreError::ShapeMismatch(format!(
                "binary mask {height}x{width} with {} values",
                data.len()
            )));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(CoreError::OutOfRange("binary mask values must be 0 or 1".into()));
        }
        Ok(Self { height, width, data })
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let data = (0..height)
            .flat_map(|y| (0..width).map(move |x| (y, x)))
            .map(|(y, x)| u8::from(f(y, x)))
            .collect();
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize) -> bool {
        self.data[y * self.width + x] == 1
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    /// Foreground pixel coordinates as `(y, x)`, row-major.
    pub fn foreground(&self) -> Vec<(usize, usize)> {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1)
            .map(|(i, _)| (i / self.width, i % self.width))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_validates_shape_and_range() {
        assert!(Image::new(2, 2, 1, vec![0.0; 4]).is_ok());
        assert!(Image::new(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(Image::new(2, 2, 2, vec![0.0; 8]).is_err());
        assert!(Image::new(1, 1, 1, vec![1.5]).is_err());
    }

    #[test]
    fn channel_mean_of_rgb() {
        let img = Image::new(1, 2, 3, vec![0.0, 0.3, 0.6, 0.9, 0.3, 0.0]).unwrap();
        let m = img.channel_mean();
        assert!((m[0] - 0.3).abs() < 1e-6 && (m[1] - 0.4).abs() < 1e-6);
    }

    #[test]
    fn point_bounds() {
        assert!(PointPrompt::new(3, 1).check_inside(2, 4).is_ok());
        assert!(PointPrompt::new(4, 1).check_inside(2, 4).is_err());
    }

    #[test]
    fn binarize_at_threshold() {
        let m = SoftMask::new(1, 3, vec![0.2, 0.5, 0.9]).unwrap();
        assert_eq!(m.binarize(0.5).data(), &[0, 1, 1]);
    }
}
