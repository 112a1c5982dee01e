//! Lossless geometric augmentation: right-angle rotations and flips.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Image, LabeledImageDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeoTransform {
    /// 90° clockwise.
    Rot90,
    Rot180,
    /// 270° clockwise (90° counter-clockwise).
    Rot270,
    /// Mirror left-right.
    HFlip,
    /// Mirror top-bottom.
    VFlip,
}

impl GeoTransform {
    pub const ROTATIONS: [GeoTransform; 3] =
        [GeoTransform::Rot90, GeoTransform::Rot180, GeoTransform::Rot270];

    pub fn name(self) -> &'static str {
        match self {
            GeoTransform::Rot90 => "rot90",
            GeoTransform::Rot180 => "rot180",
            GeoTransform::Rot270 => "rot270",
            GeoTransform::HFlip => "hflip",
            GeoTransform::VFlip => "vflip",
        }
    }

    fn swaps_axes(self) -> bool {
        matches!(self, GeoTransform::Rot90 | GeoTransform::Rot270)
    }
}

pub fn apply_transform(img: &Image, t: GeoTransform) -> Image {
    let (h, w, c) = img.dims();
    let (oh, ow) = if t.swaps_axes() { (w, h) } else { (h, w) };
    let mut pixels = Vec::with_capacity(img.len());
    for y in 0..oh {
        for x in 0..ow {
            // Source coordinates of output pixel (y, x).
            let (sy, sx) = match t {
                GeoTransform::Rot90 => (h - 1 - x, y),
                GeoTransform::Rot180 => (h - 1 - y, w - 1 - x),
                GeoTransform::Rot270 => (x, w - 1 - y),
                GeoTransform::HFlip => (y, w - 1 - x),
                GeoTransform::VFlip => (h - 1 - y, x),
            };
            for ch in 0..c {
                pixels.push(img.get(sy, sx, ch));
            }
        }
    }
    Image::from_parts_unchecked(oh, ow, c, pixels)
}

/// Returns the originals followed by, for each original in order, one
/// seeded rotation, one horizontal flip and one vertical flip (4× the input).
///
/// Non-square images can only be rotated by 180° without changing shape, so
/// for them the rotation draw is fixed to `Rot180`.
pub fn geometric_augment(ds: &LabeledImageDataset, seed: u64) -> Result<LabeledImageDataset> {
    if ds.is_empty() {
        return Err(Error::Empty("cannot augment an empty dataset".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = ds.len();
    let mut images = Vec::with_capacity(4 * n);
    let mut labels = Vec::with_capacity(4 * n);
    let mut ids = Vec::with_capacity(4 * n);
    images.extend(ds.images().iter().cloned());
    labels.extend_from_slice(ds.labels());
    ids.extend(ds.ids().iter().cloned());
    for ((img, &label), id) in ds.images().iter().zip(ds.labels()).zip(ds.ids()) {
        let draw = GeoTransform::ROTATIONS[rng.random_range(0..3)];
        let rotation = if img.height() == img.width() {
            draw
        } else {
            GeoTransform::Rot180
        };
        for t in [rotation, GeoTransform::HFlip, GeoTransform::VFlip] {
            images.push(apply_transform(img, t));
            labels.push(label);
            ids.push(format!("{id}#{}", t.name()));
        }
    }
    LabeledImageDataset::new(images, labels, ids, ds.class_names().to_vec(), ds.role())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DatasetRole;

    fn img(h: usize, w: usize) -> Image {
        Image::from_fn(h, w, 1, |y, x, _| (y * w + x) as f32 / (h * w) as f32).unwrap()
    }

    #[test]
    fn hflip_2x2() {
        // [[a,b],[c,d]] -> [[b,a],[d,c]]
        let x = Image::new(2, 2, 1, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let y = apply_transform(&x, GeoTransform::HFlip);
        assert_eq!(y.pixels(), &[0.2, 0.1, 0.4, 0.3]);
        let v = apply_transform(&x, GeoTransform::VFlip);
        assert_eq!(v.pixels(), &[0.3, 0.4, 0.1, 0.2]);
        // clockwise: [[c,a],[d,b]]
        let r = apply_transform(&x, GeoTransform::Rot90);
        assert_eq!(r.pixels(), &[0.3, 0.1, 0.4, 0.2]);
    }

    #[test]
    fn group_laws() {
        let x = img(3, 5);
        assert_eq!(apply_transform(&apply_transform(&x, GeoTransform::HFlip), GeoTransform::HFlip), x);
        assert_eq!(apply_transform(&apply_transform(&x, GeoTransform::VFlip), GeoTransform::VFlip), x);
        let mut r = x.clone();
        for _ in 0..4 {
            r = apply_transform(&r, GeoTransform::Rot90);
        }
        assert_eq!(r, x);
        let r90 = apply_transform(&x, GeoTransform::Rot90);
        assert_eq!(r90.dims(), (5, 3, 1));
        assert_eq!(
            apply_transform(&r90, GeoTransform::Rot270),
            x,
            "rot270 undoes rot90"
        );
        assert_eq!(
            apply_transform(&apply_transform(&x, GeoTransform::Rot90), GeoTransform::Rot90),
            apply_transform(&x, GeoTransform::Rot180)
        );
    }

    fn toy() -> LabeledImageDataset {
        let images = (0..5).map(|_| img(4, 4)).collect();
        LabeledImageDataset::from_images(
            images,
            vec![0, 0, 1, 1, 1],
            vec!["a".into(), "b".into()],
            DatasetRole::RealTrain,
        )
        .unwrap()
    }

    #[test]
    fn augment_quadruples_and_keeps_labels() {
        let ds = toy();
        let out = geometric_augment(&ds, 3).unwrap();
        assert_eq!(out.len(), 20);
        assert_eq!(out.class_counts(), vec![8, 12]);
        for (i, id) in out.ids().iter().enumerate().skip(5) {
            let src: usize = crate::data::base_id(id).parse().unwrap();
            assert_eq!(out.labels()[i], ds.labels()[src]);
        }
        assert_eq!(geometric_augment(&ds, 3).unwrap(), out);
    }

    #[test]
    fn augment_non_square_keeps_shape() {
        let images = (0..3).map(|_| img(2, 6)).collect();
        let ds = LabeledImageDataset::from_images(images, vec![0; 3], vec!["a".into()], DatasetRole::RealTrain)
            .unwrap();
        let out = geometric_augment(&ds, 0).unwrap();
        assert!(out.images().iter().all(|im| im.dims() == (2, 6, 1)));
    }
}
