//! Image datasets: PNG ingestion, pixel preprocessing and stratified hold-out
//! splitting.
//!
//! Pixels are stored interleaved (`(y * width + x) * channels + c`) as `f32`
//! in `[0, 1]`. Arithmetic that needs more headroom (SSIM, gradients) widens
//! to `f64` at the point of use.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    pixels: Vec<f32>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, pixels: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidImage("zero-sized image".into()));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        if pixels.len() != height * width * channels {
            return Err(Error::InvalidImage(format!(
                "{height}x{width}x{channels} needs {} pixels, got {}",
                height * width * channels,
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidImage(format!(
                "pixel value {bad} outside [0, 1]"
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            pixels,
        })
    }

    /// Builds an image from values that may stray outside `[0, 1]`, clipping
    /// them. Non-finite values become 0.
    pub fn from_clamped(
        height: usize,
        width: usize,
        channels: usize,
        values: impl IntoIterator<Item = f64>,
    ) -> Result<Self> {
        let pixels = values
            .into_iter()
            .map(|v| if v.is_finite() { v.clamp(0.0, 1.0) as f32 } else { 0.0 })
            .collect();
        Self::new(height, width, channels, pixels)
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    pixels.push(f(y, x, c));
                }
            }
        }
        Self::new(height, width, channels, pixels)
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

    /// `(height, width, channels)`
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.pixels.iter().map(|&v| f64::from(v)).collect()
    }

    pub(crate) fn from_parts_unchecked(
        height: usize,
        width: usize,
        channels: usize,
        pixels: Vec<f32>,
    ) -> Self {
        debug_assert_eq!(pixels.len(), height * width * channels);
        Self {
            height,
            width,
            channels,
            pixels,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetRole {
    RealTrain,
    RealVal,
    RealTest,
    Synthetic,
}

impl fmt::Display for DatasetRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DatasetRole::RealTrain => "real-train",
            DatasetRole::RealVal => "real-val",
            DatasetRole::RealTest => "real-test",
            DatasetRole::Synthetic => "synthetic",
        };
        f.write_str(s)
    }
}

/// A labelled image corpus. `ids` record where each image came from:
/// loaded images use `class/file.png`; derived images append `#transform`
/// or prefix a generator tag, so the originating image is always
/// recoverable.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImageDataset {
    images: Vec<Image>,
    labels: Vec<usize>,
    ids: Vec<String>,
    class_names: Vec<String>,
    role: DatasetRole,
}

impl LabeledImageDataset {
    pub fn new(
        images: Vec<Image>,
        labels: Vec<usize>,
        ids: Vec<String>,
        class_names: Vec<String>,
        role: DatasetRole,
    ) -> Result<Self> {
        if images.len() != labels.len() || images.len() != ids.len() {
            return Err(Error::InvalidDataset(format!(
                "{} images, {} labels, {} ids",
                images.len(),
                labels.len(),
                ids.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::InvalidDataset(format!(
                "label {bad} but only {} classes",
                class_names.len()
            )));
        }
        if let Some(first) = images.first() {
            let dims = first.dims();
            if let Some(other) = images.iter().find(|im| im.dims() != dims) {
                return Err(Error::InvalidDataset(format!(
                    "mixed image dimensions {:?} and {:?}",
                    dims,
                    other.dims()
                )));
            }
        }
        Ok(Self {
            images,
            labels,
            ids,
            class_names,
            role,
        })
    }

    /// Convenience constructor that numbers images `0..n` as their ids.
    pub fn from_images(
        images: Vec<Image>,
        labels: Vec<usize>,
        class_names: Vec<String>,
        role: DatasetRole,
    ) -> Result<Self> {
        let ids = (0..images.len()).map(|i| i.to_string()).collect();
        Self::new(images, labels, ids, class_names, role)
    }

    pub fn images(&self) -> &[Image] {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn role(&self) -> DatasetRole {
        self.role
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Shared `(height, width, channels)`, or `None` for an empty dataset.
    pub fn dims(&self) -> Option<(usize, usize, usize)> {
        self.images.first().map(Image::dims)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Indices of each class, in dataset order.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_classes()];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    pub fn subset(&self, indices: &[usize], role: DatasetRole) -> Self {
        Self {
            images: indices.iter().map(|&i| self.images[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            class_names: self.class_names.clone(),
            role,
        }
    }

    pub fn with_role(mut self, role: DatasetRole) -> Self {
        self.role = role;
        self
    }

    pub fn map_ids(mut self, f: impl Fn(&str) -> String) -> Self {
        self.ids = self.ids.iter().map(|id| f(id)).collect();
        self
    }

    /// Appends `other`; class lists and image dimensions must agree.
    pub fn concat(&self, other: &Self, role: DatasetRole) -> Result<Self> {
        if self.class_names != other.class_names {
            return Err(Error::InvalidDataset(
                "cannot concatenate datasets with different classes".into(),
            ));
        }
        let mut images = self.images.clone();
        images.extend(other.images.iter().cloned());
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        let mut ids = self.ids.clone();
        ids.extend(other.ids.iter().cloned());
        Self::new(images, labels, ids, self.class_names.clone(), role)
    }

    /// Resizes every image; a no-op when dimensions already match.
    pub fn resized(&self, height: usize, width: usize) -> Result<Self> {
        let images = self
            .images
            .iter()
            .map(|im| resize_bilinear(im, height, width))
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            images,
            self.labels.clone(),
            self.ids.clone(),
            self.class_names.clone(),
            self.role,
        )
    }
}

/// Strips derivation suffixes (`#hflip`, ...) to recover the originating id.
pub fn base_id(id: &str) -> &str {
    id.split('#').next().unwrap_or(id)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRatios", into = "RawRatios")]
pub struct SplitRatios {
    train: f64,
    val: f64,
    test: f64,
}

#[derive(Serialize, Deserialize)]
struct RawRatios {
    train: f64,
    val: f64,
    test: f64,
}

impl TryFrom<RawRatios> for SplitRatios {
    type Error = Error;

    fn try_from(r: RawRatios) -> Result<Self> {
        SplitRatios::new(r.train, r.val, r.test)
    }
}

impl From<SplitRatios> for RawRatios {
    fn from(r: SplitRatios) -> Self {
        RawRatios {
            train: r.train,
            val: r.val,
            test: r.test,
        }
    }
}

impl SplitRatios {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        for (name, v) in [("train", train), ("val", val), ("test", test)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidRatios(format!("{name} = {v} not in (0, 1)")));
            }
        }
        let sum = train + val + test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidRatios(format!("fractions sum to {sum}, not 1")));
        }
        Ok(Self { train, val, test })
    }

    pub fn train(&self) -> f64 {
        self.train
    }

    pub fn val(&self) -> f64 {
        self.val
    }

    pub fn test(&self) -> f64 {
        self.test
    }

    /// Per-class `(train, val, test)` counts: val and test are floored and
    /// the remainder goes to train.
    pub fn counts(&self, n: usize) -> (usize, usize, usize) {
        // The epsilon absorbs representation error such as 0.29 * 100 = 28.999...
        let floor = |r: f64| ((n as f64) * r + 1e-9).floor() as usize;
        let val = floor(self.val);
        let test = floor(self.test);
        (n - val - test, val, test)
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

impl FromStr for SplitRatios {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::InvalidRatios(format!("'{s}': {e}")))?;
        match parts.as_slice() {
            [a, b, c] => Self::new(*a, *b, *c),
            _ => Err(Error::InvalidRatios(format!(
                "'{s}': expected three comma-separated fractions"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded stratified partition. Each class is shuffled independently (one
/// RNG stream consumed in class order), then cut into val/test/train
/// blocks. Indices within each split are returned in ascending order.
pub fn stratified_split_indices(
    ds: &LabeledImageDataset,
    ratios: SplitRatios,
    seed: u64,
) -> Result<SplitIndices> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = SplitIndices {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for (class, mut idx) in ds.class_indices().into_iter().enumerate() {
        if idx.len() < 3 {
            return Err(Error::ClassTooSmall {
                class: ds.class_names()[class].clone(),
                count: idx.len(),
            });
        }
        idx.shuffle(&mut rng);
        let (_, n_val, n_test) = ratios.counts(idx.len());
        split.val.extend_from_slice(&idx[..n_val]);
        split.test.extend_from_slice(&idx[n_val..n_val + n_test]);
        split.train.extend_from_slice(&idx[n_val + n_test..]);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

pub fn stratified_split(
    ds: &LabeledImageDataset,
    ratios: SplitRatios,
    seed: u64,
) -> Result<(LabeledImageDataset, LabeledImageDataset, LabeledImageDataset)> {
    let idx = stratified_split_indices(ds, ratios, seed)?;
    Ok((
        ds.subset(&idx.train, DatasetRole::RealTrain),
        ds.subset(&idx.val, DatasetRole::RealVal),
        ds.subset(&idx.test, DatasetRole::RealTest),
    ))
}

/// Bilinear resampling with half-pixel centres and edge clamping.
pub fn resize_bilinear(img: &Image, height: usize, width: usize) -> Result<Image> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidArgument(format!(
            "resize target {height}x{width} must be at least 1x1"
        )));
    }
    if (height, width) == (img.height, img.width) {
        return Ok(img.clone());
    }
    let c = img.channels;
    let axis = |out: usize, src: usize| -> Vec<(usize, usize, f64)> {
        let scale = src as f64 / out as f64;
        (0..out)
            .map(|i| {
                let pos = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
                let lo = pos.floor() as usize;
                let hi = (lo + 1).min(src - 1);
                (lo, hi, pos - lo as f64)
            })
            .collect()
    };
    let ys = axis(height, img.height);
    let xs = axis(width, img.width);
    let mut pixels = Vec::with_capacity(height * width * c);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for ch in 0..c {
                let p = |y: usize, x: usize| f64::from(img.get(y, x, ch));
                let top = p(y0, x0) * (1.0 - fx) + p(y0, x1) * fx;
                let bottom = p(y1, x0) * (1.0 - fx) + p(y1, x1) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                pixels.push(v.clamp(0.0, 1.0) as f32);
            }
        }
    }
    Ok(Image::from_parts_unchecked(height, width, c, pixels))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadOptions {
    /// Target `(height, width)`; when set, every image is resized on load.
    pub resize: Option<(usize, usize)>,
}

pub fn load_image_dataset(root: &Path, role: DatasetRole) -> Result<LabeledImageDataset> {
    load_image_dataset_with(root, role, LoadOptions::default())
}

/// Loads a class-per-subdirectory PNG corpus. Classes and files are taken in
/// lexicographic order; non-PNG files are ignored.
pub fn load_image_dataset_with(
    root: &Path,
    role: DatasetRole,
    opts: LoadOptions,
) -> Result<LabeledImageDataset> {
    let class_dirs = sorted_entries(root)?
        .into_iter()
        .filter(|p| p.is_dir())
        .collect::<Vec<_>>();
    if class_dirs.is_empty() {
        return Err(Error::NoClasses(root.to_path_buf()));
    }
    let mut class_names = Vec::new();
    let mut images = Vec::new();
    let mut labels = Vec::new();
    let mut ids = Vec::new();
    let mut dims: Option<(usize, usize)> = None;
    for (label, dir) in class_dirs.iter().enumerate() {
        let class = file_name(dir);
        for path in sorted_entries(dir)?.into_iter().filter(|p| is_png(p)) {
            let mut img = read_png(&path)?;
            if let Some((h, w)) = opts.resize {
                img = resize_bilinear(&img, h, w)?;
            }
            let found = (img.height, img.width);
            match dims {
                None => dims = Some(found),
                Some(expected) if expected != found => {
                    return Err(Error::MixedDimensions {
                        path,
                        expected,
                        found,
                    })
                }
                _ => {}
            }
            ids.push(format!("{class}/{}", file_name(&path)));
            images.push(img);
            labels.push(label);
        }
        class_names.push(class);
    }
    if let Some(first) = images.first() {
        let c = first.channels;
        if images.iter().any(|im| im.channels != c) {
            // Grey and colour files in one corpus: promote everything to RGB.
            images = images.into_iter().map(to_rgb).collect();
        }
    }
    LabeledImageDataset::new(images, labels, ids, class_names, role)
}

fn to_rgb(img: Image) -> Image {
    if img.channels == 3 {
        return img;
    }
    let pixels = img.pixels.iter().flat_map(|&v| [v, v, v]).collect();
    Image::from_parts_unchecked(img.height, img.width, 3, pixels)
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    out.sort();
    Ok(out)
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn is_png(p: &Path) -> bool {
    p.is_file()
        && p.extension()
            .map(|e| e.eq_ignore_ascii_case("png"))
            .unwrap_or(false)
}

/// Decodes one PNG into `[0, 1]` pixels. Alpha is dropped; 16-bit samples
/// are scaled by 65535.
pub fn read_png(path: &Path) -> Result<Image> {
    let decoded = image::open(path).map_err(|e| Error::ImageDecode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(decode_dynamic(decoded))
}

pub fn decode_png_bytes(bytes: &[u8]) -> Result<Image> {
    let decoded = image::load_from_memory_with_format(bytes, image::ImageFormat::Png).map_err(
        |e| Error::ImageDecode {
            path: PathBuf::from("<memory>"),
            message: e.to_string(),
        },
    )?;
    Ok(decode_dynamic(decoded))
}

fn decode_dynamic(img: DynamicImage) -> Image {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let grey = !img.color().has_color();
    let sixteen = img.color().bytes_per_pixel() / img.color().channel_count() >= 2;
    let (channels, pixels): (usize, Vec<f32>) = match (grey, sixteen) {
        (true, false) => (1, img.to_luma8().into_raw().into_iter().map(u8_norm).collect()),
        (true, true) => (1, img.to_luma16().into_raw().into_iter().map(u16_norm).collect()),
        (false, false) => (3, img.to_rgb8().into_raw().into_iter().map(u8_norm).collect()),
        (false, true) => (3, img.to_rgb16().into_raw().into_iter().map(u16_norm).collect()),
    };
    Image::from_parts_unchecked(h, w, channels, pixels)
}

fn u8_norm(v: u8) -> f32 {
    f32::from(v) / 255.0
}

fn u16_norm(v: u16) -> f32 {
    f32::from(v) / 65535.0
}

/// Writes an 8-bit PNG (grey or RGB). Values are rounded to the nearest
/// 1/255 step, so a loaded 8-bit image survives a write/read cycle exactly.
pub fn write_png(img: &Image, path: &Path) -> Result<()> {
    let to_u8 = |v: f32| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    let raw: Vec<u8> = img.pixels.iter().map(|&v| to_u8(v)).collect();
    let (w, h) = (img.width as u32, img.height as u32);
    let encode_err = |e: image::ImageError| Error::ImageEncode {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    if img.channels == 1 {
        ImageBuffer::<Luma<u8>, _>::from_raw(w, h, raw)
            .expect("buffer length checked by Image invariants")
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(encode_err)
    } else {
        ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, raw)
            .expect("buffer length checked by Image invariants")
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(encode_err)
    }
}

/// Materializes a dataset as `dir/<class>/<nnnnn>.png`.
pub fn save_image_dataset(ds: &LabeledImageDataset, dir: &Path) -> Result<()> {
    for class in ds.class_names() {
        let d = dir.join(class);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    for (i, (img, &label)) in ds.images().iter().zip(ds.labels()).enumerate() {
        let path = dir.join(&ds.class_names()[label]).join(format!("{i:05}.png"));
        write_png(img, &path)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(h: usize, w: usize, v: &[f32]) -> Image {
        Image::new(h, w, 1, v.to_vec()).unwrap()
    }

    fn toy(counts: &[usize]) -> LabeledImageDataset {
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            for i in 0..n {
                images.push(Image::filled(2, 2, 1, (i as f32) / 100.0).unwrap());
                labels.push(c);
            }
        }
        let names = (0..counts.len()).map(|c| format!("c{c}")).collect();
        LabeledImageDataset::from_images(images, labels, names, DatasetRole::RealTrain).unwrap()
    }

    #[test]
    fn image_rejects_out_of_range_and_bad_length() {
        assert!(Image::new(1, 2, 1, vec![0.0, 1.5]).is_err());
        assert!(Image::new(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(Image::new(1, 1, 2, vec![0.0; 2]).is_err());
    }

    #[test]
    fn ratios_parse_and_validate() {
        let r: SplitRatios = "0.8,0.1,0.1".parse().unwrap();
        assert_eq!(r.counts(10), (8, 1, 1));
        assert!("0.8,0.1".parse::<SplitRatios>().is_err());
        assert!(SplitRatios::new(0.5, 0.5, 0.1).is_err());
        assert!(SplitRatios::new(1.0, 0.0, 0.0).is_err());
        assert_eq!(SplitRatios::new(0.7, 0.29, 0.01).unwrap().counts(100), (70, 29, 1));
    }

    #[test]
    fn split_single_class_sizes() {
        let ds = toy(&[10]);
        let (tr, va, te) = stratified_split(&ds, SplitRatios::default(), 1).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (8, 1, 1));
    }

    #[test]
    fn split_is_stratified_per_class() {
        let ds = toy(&[10, 10]);
        let (tr, va, te) = stratified_split(&ds, SplitRatios::default(), 3).unwrap();
        assert_eq!(tr.class_counts(), vec![8, 8]);
        assert_eq!(va.class_counts(), vec![1, 1]);
        assert_eq!(te.class_counts(), vec![1, 1]);
    }

    #[test]
    fn split_is_seed_deterministic() {
        let ds = toy(&[7, 12, 5]);
        let a = stratified_split_indices(&ds, SplitRatios::default(), 42).unwrap();
        let b = stratified_split_indices(&ds, SplitRatios::default(), 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_rejects_tiny_class() {
        let ds = toy(&[5, 2]);
        match stratified_split(&ds, SplitRatios::default(), 0) {
            Err(Error::ClassTooSmall { class, count }) => {
                assert_eq!(class, "c1");
                assert_eq!(count, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn resize_constant_stays_constant() {
        let img = Image::filled(2, 2, 1, 0.5).unwrap();
        let out = resize_bilinear(&img, 4, 4).unwrap();
        assert_eq!(out.dims(), (4, 4, 1));
        assert!(out.pixels().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn resize_identity() {
        let img = Image::from_fn(3, 5, 3, |y, x, c| ((y * 7 + x * 3 + c) % 11) as f32 / 10.0)
            .unwrap();
        assert_eq!(resize_bilinear(&img, 3, 5).unwrap(), img);
    }

    #[test]
    fn resize_column_is_monotone() {
        // Half-pixel centres: sources -0.25, 0.25, 0.75, 1.25 clamp to
        // 0, 0.25, 0.75, 1 giving 0, 0.25, 0.75, 1.
        let img = gray(2, 1, &[0.0, 1.0]);
        let out = resize_bilinear(&img, 4, 1).unwrap();
        assert_eq!(out.pixels(), &[0.0, 0.25, 0.75, 1.0]);
        assert!(out.pixels().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn resize_rejects_zero() {
        assert!(resize_bilinear(&gray(1, 1, &[0.0]), 0, 3).is_err());
    }

    #[test]
    fn base_id_strips_transform_suffix() {
        assert_eq!(base_id("a/x.png#hflip"), "a/x.png");
        assert_eq!(base_id("a/x.png"), "a/x.png");
    }
}
