//! Bit-exact ingestion of MNIST (IDX) and CIFAR-10 (binary batches).
//!
//! Images come back as `Tensor3` values scaled to `[0, 1]`, in file order,
//! with no shuffling or mean subtraction. MNIST digits are zero-padded from
//! 28x28 to a centered 32x32 so both datasets share the same spatial extent.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tensor::Tensor3;

const MNIST_IMAGE_MAGIC: u32 = 0x0000_0803;
const MNIST_LABEL_MAGIC: u32 = 0x0000_0801;
const MNIST_SIDE: usize = 28;
const PADDED_SIDE: usize = 32;
const CIFAR_SIDE: usize = 32;
const CIFAR_RECORD: usize = 1 + 3 * CIFAR_SIDE * CIFAR_SIDE;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::config(format!(
                "unknown split '{other}' (expected 'train' or 'test')"
            ))),
        }
    }
}

/// An immutable image collection with one label per image.
#[derive(Debug, Clone)]
pub struct LabeledImageSet {
    pub name: String,
    pub images: Vec<Tensor3>,
    pub labels: Vec<usize>,
    pub shape: (usize, usize, usize),
}

impl LabeledImageSet {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

/// Loads an MNIST split from `dir`, which must hold the four standard IDX
/// files (`train-images-idx3-ubyte`, `t10k-labels-idx1-ubyte`, ...).
///
/// Pixels are scaled by 1/255 and the 28x28 grid is centered in a 32x32
/// zero background. The SHA-256 of the first raw image is logged so runs on
/// different machines can confirm they read identical bytes.
pub fn load_mnist(dir: &Path, split: Split) -> Result<LabeledImageSet> {
    let (images_name, labels_name) = match split {
        Split::Train => ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
        Split::Test => ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
    };
    let images_path = dir.join(images_name);
    let labels_path = dir.join(labels_name);

    let image_bytes = fs::read(&images_path)
        .map_err(Error::io(format!("reading {}", images_path.display())))?;
    let label_bytes = fs::read(&labels_path)
        .map_err(Error::io(format!("reading {}", labels_path.display())))?;

    let magic = be_u32(&image_bytes, 0, &images_path)?;
    if magic != MNIST_IMAGE_MAGIC {
        return Err(Error::data(format!(
            "{}: bad magic 0x{magic:08x} at offset 0 (expected 0x{MNIST_IMAGE_MAGIC:08x})",
            images_path.display()
        )));
    }
    let n_images = be_u32(&image_bytes, 4, &images_path)? as usize;
    let rows = be_u32(&image_bytes, 8, &images_path)? as usize;
    let cols = be_u32(&image_bytes, 12, &images_path)? as usize;
    if rows != MNIST_SIDE || cols != MNIST_SIDE {
        return Err(Error::data(format!(
            "{}: image size {rows}x{cols}, expected {MNIST_SIDE}x{MNIST_SIDE}",
            images_path.display()
        )));
    }
    let pixels = MNIST_SIDE * MNIST_SIDE;
    let expected = 16 + n_images * pixels;
    if image_bytes.len() != expected {
        return Err(Error::data(format!(
            "{}: {} bytes but header promises {expected} ({n_images} images of {pixels} \
             bytes after a 16-byte header); payload ends at offset {}",
            images_path.display(),
            image_bytes.len(),
            image_bytes.len().max(16) - 16
        )));
    }

    let label_magic = be_u32(&label_bytes, 0, &labels_path)?;
    if label_magic != MNIST_LABEL_MAGIC {
        return Err(Error::data(format!(
            "{}: bad magic 0x{label_magic:08x} at offset 0 (expected 0x{MNIST_LABEL_MAGIC:08x})",
            labels_path.display()
        )));
    }
    let n_labels = be_u32(&label_bytes, 4, &labels_path)? as usize;
    if label_bytes.len() != 8 + n_labels {
        return Err(Error::data(format!(
            "{}: {} bytes but header promises {} ({n_labels} labels after an 8-byte header)",
            labels_path.display(),
            label_bytes.len(),
            8 + n_labels
        )));
    }
    if n_images != n_labels {
        return Err(Error::data(format!(
            "{} holds {n_images} images but {} holds {n_labels} labels",
            images_path.display(),
            labels_path.display()
        )));
    }

    if n_images > 0 {
        let first = &image_bytes[16..16 + pixels];
        log::info!(
            "{}: first image sha256 {}",
            images_path.display(),
            hex_digest(first)
        );
    }

    let pad = (PADDED_SIDE - MNIST_SIDE) / 2;
    let mut images = Vec::with_capacity(n_images);
    let mut labels = Vec::with_capacity(n_images);
    for i in 0..n_images {
        let raw = &image_bytes[16 + i * pixels..16 + (i + 1) * pixels];
        let mut tensor = Tensor3::zeros(PADDED_SIDE, PADDED_SIDE, 1);
        for r in 0..MNIST_SIDE {
            for c in 0..MNIST_SIDE {
                let v = raw[r * MNIST_SIDE + c] as f32 / 255.0;
                tensor.set(r + pad, c + pad, 0, v);
            }
        }
        images.push(tensor);

        let label = label_bytes[8 + i] as usize;
        if label > 9 {
            return Err(Error::data(format!(
                "{}: label {label} at record {i} outside 0..=9",
                labels_path.display()
            )));
        }
        labels.push(label);
    }

    Ok(LabeledImageSet {
        name: "mnist".to_string(),
        images,
        labels,
        shape: (PADDED_SIDE, PADDED_SIDE, 1),
    })
}

/// Loads a CIFAR-10 split from `dir`, which must hold the standard binary
/// batches (`data_batch_1.bin` ... `data_batch_5.bin` and `test_batch.bin`).
///
/// Each 3073-byte record is one label byte followed by channel-planar
/// 32x32 red, green and blue planes; pixels are scaled by 1/255.
pub fn load_cifar10(dir: &Path, split: Split) -> Result<LabeledImageSet> {
    let files: Vec<&str> = match split {
        Split::Train => vec![
            "data_batch_1.bin",
            "data_batch_2.bin",
            "data_batch_3.bin",
            "data_batch_4.bin",
            "data_batch_5.bin",
        ],
        Split::Test => vec!["test_batch.bin"],
    };

    let plane = CIFAR_SIDE * CIFAR_SIDE;
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for name in files {
        let path = dir.join(name);
        let bytes = fs::read(&path).map_err(Error::io(format!("reading {}", path.display())))?;
        if bytes.len() % CIFAR_RECORD != 0 {
            return Err(Error::data(format!(
                "{}: {} bytes is not a whole number of {CIFAR_RECORD}-byte records \
                 ({} bytes left over)",
                path.display(),
                bytes.len(),
                bytes.len() % CIFAR_RECORD
            )));
        }

        for (i, record) in bytes.chunks_exact(CIFAR_RECORD).enumerate() {
            let label = record[0] as usize;
            if label > 9 {
                return Err(Error::data(format!(
                    "{}: label {label} at record {i} outside 0..=9",
                    path.display()
                )));
            }
            if images.is_empty() {
                log::info!(
                    "{}: first image sha256 {}",
                    path.display(),
                    hex_digest(&record[1..])
                );
            }

            let mut tensor = Tensor3::zeros(CIFAR_SIDE, CIFAR_SIDE, 3);
            for ch in 0..3 {
                let start = 1 + ch * plane;
                for r in 0..CIFAR_SIDE {
                    for c in 0..CIFAR_SIDE {
                        let v = record[start + r * CIFAR_SIDE + c] as f32 / 255.0;
                        tensor.set(r, c, ch, v);
                    }
                }
            }
            images.push(tensor);
            labels.push(label);
        }
    }

    Ok(LabeledImageSet {
        name: "cifar10".to_string(),
        images,
        labels,
        shape: (CIFAR_SIDE, CIFAR_SIDE, 3),
    })
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| {
            Error::data(format!(
                "{}: truncated header at offset {offset}",
                path.display()
            ))
        })
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
