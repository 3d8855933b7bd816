//! Weight checkpoints: 16-byte header (`b"BAPW"`, `u32` version, `u64`
//! parameter count, all little endian) followed by the parameters as `f32` LE.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::CoreError;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"BAPW";
const VERSION: u32 = 1;
pub const CHECKPOINT_HEADER_LEN: usize = 16;

pub fn write_checkpoint(path: &Path, params: &[f64]) -> Result<(), CoreError> {
    let mut buf = Vec::with_capacity(CHECKPOINT_HEADER_LEN + 4 * params.len());
    buf.extend_from_slice(&CHECKPOINT_MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for &p in params {
        buf.extend_from_slice(&(p as f32).to_le_bytes());
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Vec<f64>, CoreError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < CHECKPOINT_HEADER_LEN || bytes[..4] != CHECKPOINT_MAGIC {
        return Err(CoreError::Format("not a weight checkpoint".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(CoreError::Format(format!("unsupported checkpoint version {version}")));
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = &bytes[CHECKPOINT_HEADER_LEN..];
    if body.len() != 4 * count {
        return Err(CoreError::Format(format!(
            "checkpoint declares {count} parameters but holds {} bytes",
            body.len()
        )));
    }
    Ok(body
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect())
}
