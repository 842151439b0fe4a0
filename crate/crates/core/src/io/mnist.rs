//! MNIST in the IDX format, normalized with training-split statistics.

use std::path::Path;

use super::record::{read_file, write_file};
use crate::dataset::{Dataset, Split};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

/// Pixel statistics on the `[0, 1]` scale (bytes divided by 255).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone)]
pub struct Mnist {
    pub train: Dataset,
    pub test: Dataset,
    pub normalization: Normalization,
}

/// Raw IDX image block: `count × rows × cols` bytes.
#[derive(Debug, Clone)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| Error::format(path, format!("truncated header: missing {what}")))
}

pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<IdxImages> {
    let magic = be_u32(bytes, 0, path, "magic")?;
    if magic != IMAGE_MAGIC {
        return Err(Error::format(path, format!("bad image magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}")));
    }
    let count = be_u32(bytes, 4, path, "image count")? as usize;
    let rows = be_u32(bytes, 8, path, "row count")? as usize;
    let cols = be_u32(bytes, 12, path, "column count")? as usize;
    let expected = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::format(path, "image dimensions overflow"))?;
    let body = &bytes[16..];
    if body.len() != expected {
        return Err(Error::format(
            path,
            format!("{count} images of {rows}x{cols} need {expected} bytes, file has {}", body.len()),
        ));
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: body.to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0, path, "magic")?;
    if magic != LABEL_MAGIC {
        return Err(Error::format(path, format!("bad label magic {magic:#010x}, expected {LABEL_MAGIC:#010x}")));
    }
    let count = be_u32(bytes, 4, path, "label count")? as usize;
    let body = &bytes[8..];
    if body.len() != count {
        return Err(Error::format(path, format!("{count} labels declared, file has {}", body.len())));
    }
    if let Some(bad) = body.iter().find(|&&l| l > 9) {
        return Err(Error::format(path, format!("label {bad} outside 0..=9")));
    }
    Ok(body.to_vec())
}

pub fn encode_idx_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for v in [IMAGE_MAGIC, images.count as u32, images.rows as u32, images.cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Writes a four-file IDX directory (used for fixtures and subsets).
pub fn write_mnist_dir(dir: &Path, train: (&IdxImages, &[u8]), test: (&IdxImages, &[u8])) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join(TRAIN_IMAGES), &encode_idx_images(train.0))?;
    write_file(&dir.join(TRAIN_LABELS), &encode_idx_labels(train.1))?;
    write_file(&dir.join(TEST_IMAGES), &encode_idx_images(test.0))?;
    write_file(&dir.join(TEST_LABELS), &encode_idx_labels(test.1))
}

/// Population mean and standard deviation of `pixels / 255`.
pub fn pixel_statistics(pixels: &[u8]) -> Normalization {
    let n = pixels.len() as f64;
    let mut hist = [0u64; 256];
    for &p in pixels {
        hist[p as usize] += 1;
    }
    let mean = hist.iter().enumerate().map(|(v, &c)| c as f64 * (v as f64 / 255.0)).sum::<f64>() / n;
    let var = hist
        .iter()
        .enumerate()
        .map(|(v, &c)| c as f64 * (v as f64 / 255.0 - mean).powi(2))
        .sum::<f64>()
        / n;
    Normalization { mean, std: var.sqrt() }
}

fn to_dataset(images: &IdxImages, labels: &[u8], norm: Normalization, split: Split) -> Dataset {
    let lut: Vec<f64> = (0..256).map(|v| (v as f64 / 255.0 - norm.mean) / norm.std).collect();
    let data = images.pixels.iter().map(|&p| lut[p as usize]).collect();
    let inputs = Tensor::new(vec![images.count, 1, images.rows, images.cols], data).expect("idx shape");
    Dataset {
        inputs,
        labels: labels.iter().map(|&l| l as usize).collect(),
        split,
    }
}

fn load_pair(dir: &Path, images: &str, labels: &str) -> Result<(IdxImages, Vec<u8>)> {
    let ipath = dir.join(images);
    let lpath = dir.join(labels);
    let imgs = parse_idx_images(&read_file(&ipath)?, &ipath)?;
    let labs = parse_idx_labels(&read_file(&lpath)?, &lpath)?;
    if imgs.count != labs.len() {
        return Err(Error::format(
            &lpath,
            format!("{} labels for {} images in {}", labs.len(), imgs.count, ipath.display()),
        ));
    }
    Ok((imgs, labs))
}

/// Loads the four standard IDX files from `dir`. Both splits are normalized
/// with the training split's pixel mean and standard deviation.
pub fn load_mnist(dir: impl AsRef<Path>) -> Result<Mnist> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::format(dir, "MNIST directory does not exist"));
    }
    let (train_images, train_labels) = load_pair(dir, TRAIN_IMAGES, TRAIN_LABELS)?;
    let (test_images, test_labels) = load_pair(dir, TEST_IMAGES, TEST_LABELS)?;
    if (train_images.rows, train_images.cols) != (test_images.rows, test_images.cols) {
        return Err(Error::format(dir, "train and test images differ in size"));
    }
    let normalization = pixel_statistics(&train_images.pixels);
    if normalization.std == 0.0 {
        return Err(Error::format(dir, "training images have zero variance"));
    }
    Ok(Mnist {
        train: to_dataset(&train_images, &train_labels, normalization, Split::Train),
        test: to_dataset(&test_images, &test_labels, normalization, Split::Test),
        normalization,
    })
}
