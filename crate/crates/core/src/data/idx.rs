//! IDX image/label files and the downscaled MNIST loader.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{split, Dataset, SplitSpec};
use crate::error::{Error, Result};
use crate::scalar::Real;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;
pub const IMAGES_FILE: &str = "train-images-idx3-ubyte";
pub const LABELS_FILE: &str = "train-labels-idx1-ubyte";
/// Side length of the downscaled images.
pub const MNIST_SIDE: usize = 16;

/// Unsigned-byte image stack, row-major per image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn image(&self, i: usize) -> &[u8] {
        let size = self.rows * self.cols;
        &self.pixels[i * size..(i + 1) * size]
    }
}

fn be_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| Error::Truncated(format!("{what} header")))
}

fn check_magic(bytes: &[u8], expected: u32, what: &str) -> Result<()> {
    let found = be_u32(bytes, 0, what)?;
    if found != expected {
        return Err(Error::BadMagic { expected, found });
    }
    Ok(())
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    check_magic(bytes, IMAGES_MAGIC, "image file")?;
    let count = be_u32(bytes, 4, "image file")? as usize;
    let rows = be_u32(bytes, 8, "image file")? as usize;
    let cols = be_u32(bytes, 12, "image file")? as usize;
    let need = count * rows * cols;
    let body = &bytes[16..];
    if body.len() < need {
        return Err(Error::Truncated(format!(
            "image file holds {} of {need} pixel bytes",
            body.len()
        )));
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: body[..need].to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(bytes, LABELS_MAGIC, "label file")?;
    let count = be_u32(bytes, 4, "label file")? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(Error::Truncated(format!(
            "label file holds {} of {count} labels",
            body.len()
        )));
    }
    Ok(body[..count].to_vec())
}

/// Bilinear resize with corner-aligned sampling: output pixel `i` samples the
/// source at `i · (src − 1) / (dst − 1)`, so corners map onto corners.
pub fn downscale_bilinear(src: &[f64], rows: usize, cols: usize, out_rows: usize, out_cols: usize) -> Vec<f64> {
    let coord = |i: usize, src_n: usize, dst_n: usize| -> (usize, usize, f64) {
        if dst_n == 1 || src_n == 1 {
            return (0, 0, 0.0);
        }
        let s = i as f64 * (src_n - 1) as f64 / (dst_n - 1) as f64;
        let lo = (s.floor() as usize).min(src_n - 1);
        let hi = (lo + 1).min(src_n - 1);
        (lo, hi, s - lo as f64)
    };
    let mut out = Vec::with_capacity(out_rows * out_cols);
    for r in 0..out_rows {
        let (r0, r1, fr) = coord(r, rows, out_rows);
        for c in 0..out_cols {
            let (c0, c1, fc) = coord(c, cols, out_cols);
            let top = src[r0 * cols + c0] * (1.0 - fc) + src[r0 * cols + c1] * fc;
            let bottom = src[r1 * cols + c0] * (1.0 - fc) + src[r1 * cols + c1] * fc;
            out.push(top * (1.0 - fr) + bottom * fr);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct MnistOptions {
    /// Digits to keep; labels are re-indexed in this order.
    pub classes: Vec<u8>,
    /// Seeded subsample of the selected images.
    pub max_samples: Option<usize>,
    pub split: SplitSpec,
    pub seed: u64,
}

impl MnistOptions {
    pub fn new(classes: &[u8], seed: u64) -> Self {
        Self {
            classes: classes.to_vec(),
            max_samples: None,
            split: SplitSpec::Fractions {
                held_out: 0.2,
                test_fraction: 0.1,
            },
            seed,
        }
    }

    pub fn mnist2(seed: u64) -> Self {
        Self::new(&[1, 9], seed)
    }

    pub fn mnist4(seed: u64) -> Self {
        Self::new(&[1, 9, 7, 3], seed)
    }

    pub fn mnist10(seed: u64) -> Self {
        Self::new(&[0, 1, 2, 3, 4, 5, 6, 7, 8, 9], seed)
    }
}

/// Reads `train-images-idx3-ubyte` and `train-labels-idx1-ubyte` from `dir`,
/// keeps the requested digits, downscales to 16×16 and maps pixels to [0, 1].
pub fn load_mnist<T: Real>(dir: &Path, opts: &MnistOptions) -> Result<Dataset<T>> {
    let read = |name: &str| {
        let p = dir.join(name);
        std::fs::read(&p).map_err(|e| Error::io(p, e))
    };
    let images = parse_idx_images(&read(IMAGES_FILE)?)?;
    let labels = parse_idx_labels(&read(LABELS_FILE)?)?;
    if images.count != labels.len() {
        return Err(Error::CountMismatch {
            images: images.count,
            labels: labels.len(),
        });
    }
    if opts.classes.is_empty() {
        return Err(Error::InvalidConfig("no MNIST classes selected".into()));
    }
    let mut selected: Vec<usize> = (0..labels.len())
        .filter(|&i| opts.classes.contains(&labels[i]))
        .collect();
    for c in &opts.classes {
        if !selected.iter().any(|&i| labels[i] == *c) {
            return Err(Error::EmptyClass(c.to_string()));
        }
    }
    if let Some(max) = opts.max_samples {
        if max < selected.len() {
            selected.shuffle(&mut ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed));
            selected.truncate(max);
            selected.sort_unstable();
        }
    }
    let mut features = Vec::with_capacity(selected.len());
    let mut ys = Vec::with_capacity(selected.len());
    for &i in &selected {
        let px: Vec<f64> = images.image(i).iter().map(|&b| f64::from(b) / 255.0).collect();
        let small = downscale_bilinear(&px, images.rows, images.cols, MNIST_SIDE, MNIST_SIDE);
        features.push(small.into_iter().map(|v| T::lit(v.clamp(0.0, 1.0))).collect());
        ys.push(opts.classes.iter().position(|&c| c == labels[i]).expect("selected class"));
    }
    let idx: Vec<usize> = (0..features.len()).collect();
    let ds = Dataset {
        name: format!("mnist{}", opts.classes.len()),
        feature_names: (0..MNIST_SIDE * MNIST_SIDE).map(|k| format!("px{k}")).collect(),
        features,
        labels: ys,
        class_names: opts.classes.iter().map(u8::to_string).collect(),
        splits: split(&idx, opts.split, opts.seed)?,
        domain: (T::zero(), T::one()),
    };
    ds.validate()?;
    Ok(ds)
}

/// Writes an IDX image/label pair; used to build fixtures.
pub fn write_idx(dir: &Path, images: &IdxImages, labels: &[u8]) -> Result<()> {
    let mut img = Vec::with_capacity(16 + images.pixels.len());
    for v in [IMAGES_MAGIC, images.count as u32, images.rows as u32, images.cols as u32] {
        img.extend_from_slice(&v.to_be_bytes());
    }
    img.extend_from_slice(&images.pixels);
    let mut lab = Vec::with_capacity(8 + labels.len());
    for v in [LABELS_MAGIC, labels.len() as u32] {
        lab.extend_from_slice(&v.to_be_bytes());
    }
    lab.extend_from_slice(labels);
    crate::ansatz::checkpoint::write_atomic(&dir.join(IMAGES_FILE), &img)?;
    crate::ansatz::checkpoint::write_atomic(&dir.join(LABELS_FILE), &lab)
}
