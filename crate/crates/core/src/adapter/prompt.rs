use crate::{CoreError, PointPrompt};

/// Sinusoidal embedding of a point prompt, every entry in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PromptEmbedding(pub Vec<f32>);

/// Embeds the point's relative position. For `k < E/4` with
/// `ω_k = 10000^(−4k/E)` the layout is
/// `[sin(ω_k x̂)…, cos(ω_k x̂)…, sin(ω_k ŷ)…, cos(ω_k ŷ)…]`,
/// `x̂ = x/W`, `ŷ = y/H`.
pub fn embed_prompt(point: PointPrompt, height: usize, width: usize, dim: usize) -> Result<PromptEmbedding, CoreError> {
    if dim == 0 || !dim.is_multiple_of(4) {
        return Err(CoreError::Config(format!(
            "prompt embedding size must be a positive multiple of 4, got {dim}"
        )));
    }
    point.check_inside(height, width)?;
    let quarter = dim / 4;
    let xn = point.x as f64 / width as f64;
    let yn = point.y as f64 / height as f64;
    let freqs: Vec<f64> = (0..quarter)
        .map(|k| 10000f64.powf(-4.0 * k as f64 / dim as f64))
        .collect();
    let mut out = Vec::with_capacity(dim);
    for pos in [xn, yn] {
        out.extend(freqs.iter().map(|w| (w * pos).sin() as f32));
        out.extend(freqs.iter().map(|w| (w * pos).cos() as f32));
    }
    Ok(PromptEmbedding(out))
}
