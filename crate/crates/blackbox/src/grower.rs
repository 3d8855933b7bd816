use std::collections::VecDeque;

use baps_core::{Image, OracleError, PointPrompt, SoftMask};

/// Fixed settings of the simulated model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowerParams {
    tolerance: f32,
    sigma: f32,
    connectivity: u8,
}

impl Default for GrowerParams {
    fn default() -> Self {
        Self {
            tolerance: 0.15,
            sigma: 1.0,
            connectivity: 4,
        }
    }
}

impl GrowerParams {
    /// `tolerance` in `(0, 1)`, `sigma >= 0` (0 disables smoothing),
    /// `connectivity` 4 or 8.
    pub fn new(tolerance: f32, sigma: f32, connectivity: u8) -> Result<Self, String> {
        if !(tolerance > 0.0 && tolerance < 1.0) {
            return Err(format!("tolerance {tolerance} not in (0, 1)"));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(format!("sigma {sigma} must be finite and >= 0"));
        }
        if connectivity != 4 && connectivity != 8 {
            return Err(format!("connectivity must be 4 or 8, got {connectivity}"));
        }
        Ok(Self {
            tolerance,
            sigma,
            connectivity,
        })
    }
}

pub fn segment(img: &Image, point: PointPrompt, params: &GrowerParams) -> Result<SoftMask, OracleError> {
    let (h, w) = (img.height(), img.width());
    if point.x >= w || point.y >= h {
        return Err(OracleError::PointOutside { x: point.x, y: point.y });
    }
    let smooth = gaussian_blur(&img.channel_mean(), h, w, params.sigma);
    let seed = smooth[point.y * w + point.x];
    let tau = params.tolerance;

    let mut out = vec![0.0f32; h * w];
    let mut visited = vec![false; h * w];
    let mut queue = VecDeque::from([point.y * w + point.x]);
    visited[point.y * w + point.x] = true;
    while let Some(i) = queue.pop_front() {
        let gap = (smooth[i] - seed).abs();
        out[i] = (1.0 - gap / tau).max(0.0);
        let (y, x) = ((i / w) as isize, (i % w) as isize);
        for (dy, dx) in neighbours(params.connectivity) {
            let (ny, nx) = (y + dy, x + dx);
            if ny < 0 || nx < 0 || ny >= h as isize || nx >= w as isize {
                continue;
            }
            let j = ny as usize * w + nx as usize;
            if !visited[j] && (smooth[j] - seed).abs() <= tau {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    SoftMask::new(h, w, out).map_err(|e| OracleError::InvalidRequest(e.to_string()))
}

fn neighbours(connectivity: u8) -> &'static [(isize, isize)] {
    const FOUR: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
    const EIGHT: [(isize, isize); 8] = [(-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)];
    if connectivity == 8 {
        &EIGHT
    } else {
        &FOUR
    }
}

/// Separable Gaussian blur with radius `ceil(3σ)` and replicated borders.
fn gaussian_blur(plane: &[f32], h: usize, w: usize, sigma: f32) -> Vec<f32> {
    if sigma == 0.0 {
        return plane.to_vec();
    }
    let r = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f32> = (-r..=r)
        .map(|k| (-(k * k) as f32 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f32 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);

    let clampi = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0f32; h * w];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, &kv)| kv * plane[y * w + clampi(x as isize + k as isize - r, w)])
                .sum();
        }
    }
    let mut out = vec![0.0f32; h * w];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, &kv)| kv * tmp[clampi(y as isize + k as isize - r, h) * w + x])
                .sum();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blur_preserves_constants() {
        let out = gaussian_blur(&[0.4; 25], 5, 5, 1.3);
        assert!(out.iter().all(|v| (v - 0.4).abs() < 1e-6));
    }

    #[test]
    fn blur_spreads_impulse_symmetrically() {
        let mut plane = vec![0.0; 81];
        plane[40] = 1.0;
        let out = gaussian_blur(&plane, 9, 9, 1.0);
        assert!((out.iter().sum::<f32>() - 1.0).abs() < 1e-5);
        assert_eq!(out[39], out[41]);
        assert_eq!(out[31], out[49]);
        assert!(out[40] > out[41] && out[41] > out[42]);
    }

    #[test]
    fn params_validated() {
        assert!(GrowerParams::new(0.0, 1.0, 4).is_err());
        assert!(GrowerParams::new(1.0, 1.0, 4).is_err());
        assert!(GrowerParams::new(0.1, -1.0, 4).is_err());
        assert!(GrowerParams::new(0.1, 1.0, 6).is_err());
        assert!(GrowerParams::new(0.1, 0.0, 8).is_ok());
    }
}
