//! IDX binary files (the MNIST distribution format): big-endian `u32` magic,
//! big-endian `u32` dimensions, then unsigned bytes.

use std::path::Path;

use super::LabeledDataset;
use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

fn read_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| format_err(format!("{what}: truncated header")))
}

/// Decodes an image file and a label file. Pixels are scaled to `[0, 1]` and
/// each image is flattened row-major.
pub fn parse_idx(images: &[u8], labels: &[u8]) -> Result<LabeledDataset> {
    let magic = read_u32(images, 0, "images")?;
    if magic != IMAGES_MAGIC {
        return Err(format_err(format!("images: bad magic {magic:#010x}")));
    }
    let n = read_u32(images, 4, "images")? as usize;
    let rows = read_u32(images, 8, "images")? as usize;
    let cols = read_u32(images, 12, "images")? as usize;
    let dim = rows * cols;
    let pixels = &images[16..];
    if dim == 0 || pixels.len() != n * dim {
        return Err(format_err(format!(
            "images: expected {n} x {rows} x {cols} pixels, found {} bytes",
            pixels.len()
        )));
    }

    let magic = read_u32(labels, 0, "labels")?;
    if magic != LABELS_MAGIC {
        return Err(format_err(format!("labels: bad magic {magic:#010x}")));
    }
    let count = read_u32(labels, 4, "labels")? as usize;
    let label_bytes = &labels[8..];
    if count != n || label_bytes.len() != n {
        return Err(format_err(format!(
            "labels: {count} declared, {} present, {n} images",
            label_bytes.len()
        )));
    }
    if n == 0 {
        return Err(format_err("empty dataset"));
    }

    let features = pixels.iter().map(|&p| p as f64 / 255.0).collect();
    let labels: Vec<usize> = label_bytes.iter().map(|&l| l as usize).collect();
    let num_classes = labels.iter().max().map_or(2, |&m| (m + 1).max(2));
    LabeledDataset::new(features, labels, dim, num_classes)
}

pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let images = std::fs::read(images_path)?;
    let labels = std::fs::read(labels_path)?;
    parse_idx(&images, &labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> (Vec<u8>, Vec<u8>) {
        let mut images = vec![0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2];
        images.extend_from_slice(&[0, 255, 51, 102, 255, 0, 0, 204]);
        let labels = vec![0, 0, 8, 1, 0, 0, 0, 2, 3, 9];
        (images, labels)
    }

    #[test]
    fn two_image_fixture() {
        let (images, labels) = fixture();
        let ds = parse_idx(&images, &labels).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.dim, 4);
        assert_eq!(ds.labels, vec![3, 9]);
        assert_eq!(ds.num_classes, 10);
        assert_eq!(ds.row(0), &[0.0, 1.0, 0.2, 0.4]);
        assert_eq!(ds.row(1), &[1.0, 0.0, 0.0, 0.8]);
    }

    #[test]
    fn truncated_or_mislabelled_files_fail() {
        let (images, labels) = fixture();
        assert!(matches!(parse_idx(&images[..images.len() - 1], &labels), Err(Error::Format(_))));
        assert!(matches!(parse_idx(&images[..10], &labels), Err(Error::Format(_))));
        assert!(matches!(parse_idx(&images, &labels[..9]), Err(Error::Format(_))));
        let mut bad = images.clone();
        bad[3] = 1;
        assert!(matches!(parse_idx(&bad, &labels), Err(Error::Format(_))));
        assert!(matches!(parse_idx(&images, &images), Err(Error::Format(_))));
    }

    #[test]
    fn loads_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let (images, labels) = fixture();
        std::fs::write(dir.path().join("img"), images).unwrap();
        std::fs::write(dir.path().join("lbl"), labels).unwrap();
        let ds = load_idx(dir.path().join("img"), dir.path().join("lbl")).unwrap();
        assert_eq!(ds.len(), 2);
        assert!(load_idx(dir.path().join("missing"), dir.path().join("lbl")).is_err());
    }
}
