//! Segmentation training loss and evaluation metrics.
//!
//! The training loss works on the soft mask directly; the metrics binarize it
//! first (default threshold 0.5).

use crate::{BinaryMask, CoreError, SoftMask};

pub const BCE_EPS: f64 = 1e-7;
pub const DICE_SMOOTH: f64 = 1.0;
pub const BIN_THRESHOLD: f32 = 0.5;

fn check_shape(pred_hw: (usize, usize), target: &BinaryMask) -> Result<(), CoreError> {
    let target_hw = (target.height(), target.width());
    if pred_hw != target_hw {
        return Err(CoreError::ShapeMismatch(format!(
            "prediction {}x{} vs target {}x{}",
            pred_hw.0, pred_hw.1, target_hw.0, target_hw.1
        )));
    }
    Ok(())
}

/// Mean pixel-wise binary cross entropy with the prediction clamped to
/// `[ε, 1 − ε]`.
pub fn bce_loss(pred: &SoftMask, target: &BinaryMask) -> Result<f64, CoreError> {
    check_shape((pred.height(), pred.width()), target)?;
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let p = f64::from(p).clamp(BCE_EPS, 1.0 - BCE_EPS);
            if t == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(sum / pred.data().len() as f64)
}

/// `(2·Σ p·t + s) / (Σ p + Σ t + s)` with `s = 1`.
pub fn soft_dice_coefficient(pred: &SoftMask, target: &BinaryMask) -> Result<f64, CoreError> {
    check_shape((pred.height(), pred.width()), target)?;
    let (mut inter, mut sum_p, mut sum_t) = (0.0f64, 0.0f64, 0.0f64);
    for (&p, &t) in pred.data().iter().zip(target.data()) {
        let p = f64::from(p);
        let t = f64::from(t);
        inter += p * t;
        sum_p += p;
        sum_t += t;
    }
    Ok((2.0 * inter + DICE_SMOOTH) / (sum_p + sum_t + DICE_SMOOTH))
}

pub fn dice_loss(pred: &SoftMask, target: &BinaryMask) -> Result<f64, CoreError> {
    Ok(1.0 - soft_dice_coefficient(pred, target)?)
}

/// BCE + Dice; the per-sample scalar the optimizer sees.
pub fn total_loss(pred: &SoftMask, target: &BinaryMask) -> Result<f64, CoreError> {
    Ok(bce_loss(pred, target)? + dice_loss(pred, target)?)
}

/// Dice similarity of the binarized prediction; 1 when both masks are empty.
pub fn dice_score(pred: &SoftMask, target: &BinaryMask, threshold: f32) -> Result<f64, CoreError> {
    check_shape((pred.height(), pred.width()), target)?;
    Ok(binary_dice(&pred.binarize(threshold), target))
}

pub fn binary_dice(p: &BinaryMask, t: &BinaryMask) -> f64 {
    let (mut inter, mut np, mut nt) = (0usize, 0usize, 0usize);
    for (&a, &b) in p.data().iter().zip(t.data()) {
        inter += usize::from(a & b);
        np += usize::from(a);
        nt += usize::from(b);
    }
    if np + nt == 0 {
        1.0
    } else {
        2.0 * inter as f64 / (np + nt) as f64
    }
}

/// 95th-percentile symmetric Hausdorff distance between binarized
/// foregrounds: the larger of the two directed 95th percentiles of
/// nearest-foreground distances. Both empty gives 0; exactly one empty gives
/// the image diagonal.
pub fn hd95(pred: &SoftMask, target: &BinaryMask, threshold: f32) -> Result<f64, CoreError> {
    check_shape((pred.height(), pred.width()), target)?;
    Ok(binary_hd95(&pred.binarize(threshold), target))
}

pub fn binary_hd95(p: &BinaryMask, t: &BinaryMask) -> f64 {
    let (h, w) = (p.height(), p.width());
    match (p.count(), t.count()) {
        (0, 0) => return 0.0,
        (0, _) | (_, 0) => return ((h * h + w * w) as f64).sqrt(),
        _ => {}
    }
    let forward = directed_percentile(p, &squared_edt(t), 0.95);
    let backward = directed_percentile(t, &squared_edt(p), 0.95);
    forward.max(backward)
}

fn directed_percentile(from: &BinaryMask, sq_dist_to: &[f64], q: f64) -> f64 {
    let mut d: Vec<f64> = from
        .data()
        .iter()
        .zip(sq_dist_to)
        .filter(|(&m, _)| m == 1)
        .map(|(_, &s)| s.sqrt())
        .collect();
    d.sort_by(f64::total_cmp);
    percentile_sorted(&d, q)
}

/// Linear-interpolation percentile of an ascending slice.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let rank = q * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (rank - lo as f64) * (sorted[hi] - sorted[lo])
}

const FAR: f64 = 1e20;

/// Exact squared Euclidean distance from every pixel to the nearest
/// foreground pixel of `mask` (separable lower-envelope transform).
pub fn squared_edt(mask: &BinaryMask) -> Vec<f64> {
    let (h, w) = (mask.height(), mask.width());
    let mut grid: Vec<f64> = mask.data().iter().map(|&v| if v == 1 { 0.0 } else { FAR }).collect();

    let mut buf = vec![0.0; h.max(w)];
    for x in 0..w {
        for y in 0..h {
            buf[y] = grid[y * w + x];
        }
        let col = edt_1d(&buf[..h]);
        for y in 0..h {
            grid[y * w + x] = col[y];
        }
    }
    for y in 0..h {
        let row = edt_1d(&grid[y * w..(y + 1) * w]);
        grid[y * w..(y + 1) * w].copy_from_slice(&row);
    }
    grid
}

fn edt_1d(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut d = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q - p) as f64);
            if s <= z[k] {
                if k == 0 {
                    // cannot happen since z[0] = -inf
                    break;
                }
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for (q, out) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let diff = q as f64 - p as f64;
        *out = diff * diff + f[p];
    }
    d
}
