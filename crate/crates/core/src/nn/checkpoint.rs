//! GEVM model checkpoints.
//!
//! Little-endian layout:
//!
//! ```text
//! "GEVM"            4 bytes
//! version           u32 = 1
//! block count B     u32
//! block channels    B × u32
//! input height      u32
//! input width       u32
//! input channels    u32
//! hidden width      u32
//! class count C     u32
//! parameter count P u32
//! parameters        P × f32, in ParamLayout order
//! ```
//!
//! Parameters are trained in `f64` and narrowed to `f32` on save.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{Architecture, Classifier};

pub const MAGIC: &[u8; 4] = b"GEVM";
pub const VERSION: u32 = 1;

pub fn to_bytes(m: &Classifier) -> Vec<u8> {
    let a = m.architecture();
    let mut out = Vec::new();
    let put = |v: usize, out: &mut Vec<u8>| out.extend_from_slice(&(v as u32).to_le_bytes());
    out.extend_from_slice(MAGIC);
    put(VERSION as usize, &mut out);
    put(a.block_channels.len(), &mut out);
    for &c in &a.block_channels {
        put(c, &mut out);
    }
    for v in [
        a.input_height,
        a.input_width,
        a.input_channels,
        a.hidden,
        a.num_classes,
        m.parameter_count(),
    ] {
        put(v, &mut out);
    }
    for &p in m.params() {
        out.extend_from_slice(&(p as f32).to_le_bytes());
    }
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<Classifier> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(Error::UnrecognizedCheckpoint);
    }
    let mut pos = 4;
    let next = |pos: &mut usize| -> Result<usize> {
        let end = *pos + 4;
        let chunk = bytes.get(*pos..end).ok_or(Error::Truncated {
            expected: end,
            actual: bytes.len(),
        })?;
        *pos = end;
        Ok(u32::from_le_bytes(chunk.try_into().unwrap()) as usize)
    };
    if next(&mut pos)? != VERSION as usize {
        return Err(Error::UnrecognizedCheckpoint);
    }
    let blocks = next(&mut pos)?;
    if blocks == 0 || blocks > 16 {
        return Err(Error::UnrecognizedCheckpoint);
    }
    let channels = (0..blocks).map(|_| next(&mut pos)).collect::<Result<Vec<_>>>()?;
    let h = next(&mut pos)?;
    let w = next(&mut pos)?;
    let c = next(&mut pos)?;
    let hidden = next(&mut pos)?;
    let classes = next(&mut pos)?;
    let count = next(&mut pos)?;
    let arch = Architecture::new((h, w, c), channels, hidden, classes)?;
    if arch.parameter_count() != count {
        return Err(Error::Architecture(format!(
            "checkpoint declares {count} parameters but the architecture has {}",
            arch.parameter_count()
        )));
    }
    let expected = pos + 4 * count;
    if bytes.len() != expected {
        return Err(Error::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    let params = bytes[pos..]
        .chunks_exact(4)
        .map(|b| f64::from(f32::from_le_bytes(b.try_into().unwrap())))
        .collect();
    Classifier::from_params(arch, params)
}

pub fn save(m: &Classifier, path: &Path) -> Result<()> {
    fs::write(path, to_bytes(m)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Classifier> {
    from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
