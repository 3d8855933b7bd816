use rand::Rng;

use baps_zoo::{ParamVector, RngStream};

use super::{ImageEmbedding, PromptEmbedding, VisualPrompt, PATCH};
use crate::CoreError;

const KERNEL: usize = 4;
const STAGES: usize = 3;

/// Shape of the decoder. Each stage is a stride-2, 4×4 transposed convolution
/// (padding 1), so three stages take the `G×G` grid to `8G×8G`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderArch {
    pub grid_h: usize,
    pub grid_w: usize,
    pub image_features: usize,
    pub prompt_dim: usize,
    pub hidden: [usize; STAGES - 1],
    pub out_channels: usize,
    pub gamma: f32,
}

impl DecoderArch {
    /// Default widths for a `height × width × channels` image with 16 encoder
    /// features and a 32-dim prompt embedding.
    pub fn for_image(height: usize, width: usize, channels: usize) -> Self {
        Self {
            grid_h: height / PATCH,
            grid_w: width / PATCH,
            image_features: 16,
            prompt_dim: 32,
            hidden: [8, 4],
            out_channels: channels,
            gamma: super::DEFAULT_GAMMA,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.image_features + self.prompt_dim
    }

    fn stage_channels(&self) -> [(usize, usize); STAGES] {
        [
            (self.in_channels(), self.hidden[0]),
            (self.hidden[0], self.hidden[1]),
            (self.hidden[1], self.out_channels),
        ]
    }

    pub fn param_count(&self) -> usize {
        self.stage_channels()
            .iter()
            .map(|&(i, o)| i * o * KERNEL * KERNEL + o)
            .sum()
    }

    pub fn output_shape(&self) -> (usize, usize, usize) {
        (self.grid_h * 8, self.grid_w * 8, self.out_channels)
    }

    /// Initial weights, uniform in `[-0.01, 0.01]`.
    pub fn init_weights(&self, seed: u64) -> ParamVector {
        let mut rng = RngStream::new(seed);
        let values = (0..self.param_count())
            .map(|_| rng.random_range(-0.01..=0.01))
            .collect();
        ParamVector::new(values).expect("finite init")
    }

    pub fn decode(
        &self,
        weights: &[f64],
        img_emb: &ImageEmbedding,
        prompt_emb: &PromptEmbedding,
    ) -> Result<VisualPrompt, CoreError> {
        DecoderWeights::from_flat(self, weights)?.decode(self, img_emb, prompt_emb)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageWeights {
    pub in_channels: usize,
    pub out_channels: usize,
    /// `[in][out][ky][kx]`
    pub kernel: Vec<f32>,
    pub bias: Vec<f32>,
}

/// Structured view of the flat decoder parameter vector. Arithmetic runs in
/// `f32`, so a checkpoint (stored as `f32`) reproduces the forward pass exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderWeights {
    pub stages: Vec<StageWeights>,
}

impl DecoderWeights {
    pub fn from_flat(arch: &DecoderArch, flat: &[f64]) -> Result<Self, CoreError> {
        if flat.len() != arch.param_count() {
            return Err(CoreError::ShapeMismatch(format!(
                "decoder expects {} parameters, got {}",
                arch.param_count(),
                flat.len()
            )));
        }
        // weights are stored as f32, so anything beyond f32 range is as bad as inf
        if flat.iter().any(|&v| !(v as f32).is_finite()) {
            return Err(CoreError::NonFiniteWeights);
        }
        let mut rest = flat;
        let stages = arch
            .stage_channels()
            .iter()
            .map(|&(i, o)| {
                let nk = i * o * KERNEL * KERNEL;
                let (k, tail) = rest.split_at(nk);
                let (b, tail) = tail.split_at(o);
                rest = tail;
                StageWeights {
                    in_channels: i,
                    out_channels: o,
                    kernel: k.iter().map(|&v| v as f32).collect(),
                    bias: b.iter().map(|&v| v as f32).collect(),
                }
            })
            .collect();
        Ok(Self { stages })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.stages
            .iter()
            .flat_map(|s| s.kernel.iter().chain(&s.bias).map(|&v| f64::from(v)))
            .collect()
    }

    pub fn decode(
        &self,
        arch: &DecoderArch,
        img_emb: &ImageEmbedding,
        prompt_emb: &PromptEmbedding,
    ) -> Result<VisualPrompt, CoreError> {
        if img_emb.shape() != (arch.grid_h, arch.grid_w, arch.image_features) {
            return Err(CoreError::ShapeMismatch(format!(
                "decoder expects a {}x{}x{} embedding, got {:?}",
                arch.grid_h,
                arch.grid_w,
                arch.image_features,
                img_emb.shape()
            )));
        }
        if prompt_emb.0.len() != arch.prompt_dim {
            return Err(CoreError::ShapeMismatch(format!(
                "prompt embedding of length {} (expected {})",
                prompt_emb.0.len(),
                arch.prompt_dim
            )));
        }

        let (mut h, mut w) = (arch.grid_h, arch.grid_w);
        let cells = h * w;
        let mut x = Vec::with_capacity(arch.in_channels() * cells);
        x.extend_from_slice(&img_emb.data);
        for &p in &prompt_emb.0 {
            x.extend(std::iter::repeat_n(p, cells));
        }

        for (i, stage) in self.stages.iter().enumerate() {
            let mut y = transposed_conv(&x, h, w, stage);
            h *= 2;
            w *= 2;
            if i + 1 < self.stages.len() {
                y.iter_mut().for_each(|v| *v = v.tanh());
            } else {
                y.iter_mut().for_each(|v| *v = arch.gamma * v.tanh());
            }
            x = y;
        }
        // huge finite weights can still overflow a sum into inf − inf
        if x.iter().any(|v| v.is_nan()) {
            return Err(CoreError::NonFiniteWeights);
        }
        Ok(VisualPrompt::from_raw(h, w, arch.out_channels, x))
    }
}

/// Stride-2, 4×4, padding-1 transposed convolution on a `[c][y][x]` tensor.
///
/// Output pixel `(2m + py, 2n + px)` only receives taps with `ky ≡ py + 1` and
/// `kx ≡ px + 1 (mod 2)`, each reading input `(m + sy, n + sx)` with
/// `sy = (py + 1 - ky) / 2`. So every tap is a dense channel mix of a shifted
/// copy of the input, accumulated into one of four parity planes.
fn transposed_conv(input: &[f32], h: usize, w: usize, stage: &StageWeights) -> Vec<f32> {
    let (ci_n, co_n) = (stage.in_channels, stage.out_channels);
    let plane = h * w;

    // shifted[(sy + 1) * 3 + (sx + 1)][ci][m][n] = input[ci][m + sy][n + sx] or 0
    let mut shifted = vec![0.0f32; 9 * ci_n * plane];
    for sy in -1isize..=1 {
        for sx in -1isize..=1 {
            let base = ((sy + 1) * 3 + (sx + 1)) as usize * ci_n * plane;
            for ci in 0..ci_n {
                for m in 0..h {
                    let iy = m as isize + sy;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for n in 0..w {
                        let ix = n as isize + sx;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        shifted[base + ci * plane + m * w + n] = input[ci * plane + iy as usize * w + ix as usize];
                    }
                }
            }
        }
    }

    let mut parity = vec![0.0f32; 4 * co_n * plane];
    for ky in 0..KERNEL {
        let py = (ky + 1) % 2;
        let sy = (py as isize + 1 - ky as isize) / 2;
        for kx in 0..KERNEL {
            let px = (kx + 1) % 2;
            let sx = (px as isize + 1 - kx as isize) / 2;
            let src = &shifted[((sy + 1) * 3 + (sx + 1)) as usize * ci_n * plane..][..ci_n * plane];
            let dst = &mut parity[(py * 2 + px) * co_n * plane..][..co_n * plane];
            for co in 0..co_n {
                let acc = &mut dst[co * plane..(co + 1) * plane];
                for ci in 0..ci_n {
                    let wv = stage.kernel[((ci * co_n + co) * KERNEL + ky) * KERNEL + kx];
                    let row = &src[ci * plane..(ci + 1) * plane];
                    for (a, &x) in acc.iter_mut().zip(row) {
                        *a += wv * x;
                    }
                }
            }
        }
    }

    let (oh, ow) = (2 * h, 2 * w);
    let mut out = vec![0.0f32; co_n * oh * ow];
    for co in 0..co_n {
        let b = stage.bias[co];
        for py in 0..2 {
            for px in 0..2 {
                let src = &parity[((py * 2 + px) * co_n + co) * plane..][..plane];
                for m in 0..h {
                    for n in 0..w {
                        out[co * oh * ow + (2 * m + py) * ow + 2 * n + px] = src[m * w + n] + b;
                    }
                }
            }
        }
    }
    out
}

/// Direct scatter form of [`transposed_conv`], kept as a test oracle.
#[cfg(test)]
fn transposed_conv_direct(input: &[f32], h: usize, w: usize, stage: &StageWeights) -> Vec<f32> {
    let (oh, ow) = (2 * h, 2 * w);
    let co_n = stage.out_channels;
    let mut out = vec![0.0f32; co_n * oh * ow];
    for co in 0..co_n {
        out[co * oh * ow..(co + 1) * oh * ow].fill(stage.bias[co]);
    }
    for ci in 0..stage.in_channels {
        for co in 0..co_n {
            for ky in 0..KERNEL {
                for kx in 0..KERNEL {
                    let wv = stage.kernel[((ci * co_n + co) * KERNEL + ky) * KERNEL + kx];
                    for iy in 0..h {
                        for ix in 0..w {
                            let oy = (2 * iy + ky) as isize - 1;
                            let ox = (2 * ix + kx) as isize - 1;
                            if oy < 0 || ox < 0 || oy >= oh as isize || ox >= ow as isize {
                                continue;
                            }
                            out[co * oh * ow + oy as usize * ow + ox as usize] += wv * input[(ci * h + iy) * w + ix];
                        }
                    }
                }
            }
        }
    }
    out
}
