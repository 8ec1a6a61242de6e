//! MNIST in the IDX binary format (big-endian header, u8 payload).

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::Dataset;
use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format(format!("truncated header at byte {at}")))
}

/// Returns the dimension sizes after checking the magic number.
fn header(bytes: &[u8], magic: u32, what: &str) -> Result<Vec<usize>> {
    let found = be_u32(bytes, 0)?;
    if found != magic {
        return Err(Error::Format(format!("{what}: bad magic 0x{found:08x}, expected 0x{magic:08x}")));
    }
    let ndim = (magic & 0xff) as usize;
    (0..ndim).map(|k| be_u32(bytes, 4 + 4 * k).map(|v| v as usize)).collect()
}

pub fn load_mnist_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Dataset> {
    parse_mnist_idx(&read(images.as_ref())?, &read(labels.as_ref())?)
}

/// Pixels are scaled to `[0, 1]`; labels become 10-wide one-hot rows.
pub fn parse_mnist_idx(images: &[u8], labels: &[u8]) -> Result<Dataset> {
    let dims = header(images, IMAGES_MAGIC, "images")?;
    let ldims = header(labels, LABELS_MAGIC, "labels")?;
    let (n, pixels) = (dims[0], dims[1] * dims[2]);
    if ldims[0] != n {
        return Err(Error::Format(format!("{n} images but {} labels", ldims[0])));
    }
    let img_off = 16;
    let lab_off = 8;
    if images.len() < img_off + n * pixels || labels.len() < lab_off + n {
        return Err(Error::Format("payload shorter than header dimensions".into()));
    }
    let inputs = Array2::from_shape_fn((n, pixels), |(i, j)| images[img_off + i * pixels + j] as f64 / 255.0);
    let mut targets = Array2::zeros((n, 10));
    for i in 0..n {
        let l = labels[lab_off + i] as usize;
        if l > 9 {
            return Err(Error::Format(format!("label {l} at index {i} out of range")));
        }
        targets[[i, l]] = 1.0;
    }
    Dataset::new("mnist", inputs, targets)
}
