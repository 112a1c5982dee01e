//! Feature vectors and the GEVB embedding interchange format.
//!
//! Layout (little-endian):
//!
//! | offset | size  | field                                        |
//! |--------|-------|----------------------------------------------|
//! | 0      | 4     | magic `GEVB`                                 |
//! | 4      | 4     | format version, `u32` = 1                    |
//! | 8      | 4     | row count N, `u32`                           |
//! | 12     | 4     | dimension d, `u32`                           |
//! | 16     | 1     | source tag: 0 vgg16, 1 inception, 2 fallback |
//! | 17     | 3     | reserved, zero                               |
//! | 20     | 4·N·d | `f32` values, row-major                      |

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::LabeledImageDataset;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"GEVB";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureSource {
    Vgg16,
    Inception,
    Fallback,
}

impl FeatureSource {
    pub fn tag(self) -> u8 {
        match self {
            FeatureSource::Vgg16 => 0,
            FeatureSource::Inception => 1,
            FeatureSource::Fallback => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(FeatureSource::Vgg16),
            1 => Some(FeatureSource::Inception),
            2 => Some(FeatureSource::Fallback),
            _ => None,
        }
    }
}

/// An N×d matrix of finite feature vectors, stored row-major as `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    values: Vec<f32>,
    rows: usize,
    dim: usize,
    source: FeatureSource,
}

impl FeatureSet {
    pub fn new(values: Vec<f32>, dim: usize, source: FeatureSource) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidFeatures("dimension must be positive".into()));
        }
        if values.is_empty() || values.len() % dim != 0 {
            return Err(Error::InvalidFeatures(format!(
                "{} values do not form rows of dimension {dim}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidFeatures(format!(
                "non-finite value in row {}",
                pos / dim
            )));
        }
        let rows = values.len() / dim;
        Ok(Self {
            values,
            rows,
            dim,
            source,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], source: FeatureSource) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if rows.iter().any(|r| r.as_ref().len() != dim) {
            return Err(Error::InvalidFeatures("ragged rows".into()));
        }
        let values = rows
            .iter()
            .flat_map(|r| r.as_ref().iter().map(|&v| v as f32))
            .collect();
        Self::new(values, dim, source)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn source(&self) -> FeatureSource {
        self.source
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f32]> {
        self.values.chunks_exact(self.dim)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.push(self.source.tag());
        out.extend_from_slice(&[0, 0, 0]);
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(Error::UnrecognizedEmbedding);
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        if u32_at(4) != VERSION {
            return Err(Error::UnrecognizedEmbedding);
        }
        let rows = u32_at(8) as usize;
        let dim = u32_at(12) as usize;
        let source = FeatureSource::from_tag(bytes[16]).ok_or(Error::UnrecognizedEmbedding)?;
        let expected = HEADER_LEN + 4 * rows * dim;
        if bytes.len() != expected {
            return Err(Error::Truncated {
                expected,
                actual: bytes.len(),
            });
        }
        let values = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(values, dim, source)
    }
}

/// Writes via a temporary sibling and rename so readers never observe a
/// partial file.
pub fn write_embeddings(fs_: &FeatureSet, path: &Path) -> Result<()> {
    let tmp = path.with_extension("gevb.tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(&fs_.to_bytes()).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_embeddings(path: &Path) -> Result<FeatureSet> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    FeatureSet::from_bytes(&bytes)
}

/// Row `j` of the fallback projection: `pixel_count` standard normals scaled
/// by `1/sqrt(pixel_count)`. Each row draws from its own ChaCha stream so rows
/// can be regenerated independently.
pub fn fallback_projection_row(seed: u64, row: usize, pixel_count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(row as u64);
    let scale = 1.0 / (pixel_count as f64).sqrt();
    (0..pixel_count)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * scale
        })
        .collect()
}

/// Seeded random projection followed by `tanh`, a stand-in embedder for runs
/// without pretrained-network features.
pub fn fallback_features(ds: &LabeledImageDataset, dim: usize, seed: u64) -> Result<FeatureSet> {
    if dim < 2 {
        return Err(Error::InvalidArgument(format!(
            "fallback feature dimension must be >= 2, got {dim}"
        )));
    }
    let (h, w, c) = ds
        .dims()
        .ok_or_else(|| Error::Empty("cannot embed an empty dataset".into()))?;
    let pixel_count = h * w * c;
    let images: Vec<Vec<f64>> = ds.images().iter().map(|im| im.to_f64()).collect();

    let column = |j: usize| -> Vec<f32> {
        let proj = fallback_projection_row(seed, j, pixel_count);
        images
            .iter()
            .map(|x| {
                let dot: f64 = proj.iter().zip(x).map(|(p, v)| p * v).sum();
                dot.tanh() as f32
            })
            .collect()
    };

    #[cfg(feature = "parallel")]
    let columns: Vec<Vec<f32>> = {
        use rayon::prelude::*;
        (0..dim).into_par_iter().map(column).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let columns: Vec<Vec<f32>> = (0..dim).map(column).collect();

    let mut values = vec![0f32; images.len() * dim];
    for (j, col) in columns.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            values[i * dim + j] = v;
        }
    }
    FeatureSet::new(values, dim, FeatureSource::Fallback)
}
