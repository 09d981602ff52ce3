//! MNIST IDX files: big-endian headers, magic 0x803 for images and 0x801
//! for labels.

use crate::dataset::{DatasetRecord, Split};
use crate::error::{DataError, Result};
use byteorder::{BigEndian, ReadBytesExt};
use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};
use tensor_autodiff::Tensor;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
const CLASSES: usize = 10;

fn file_pair(split: Split) -> (&'static str, &'static str) {
    match split {
        Split::Train => ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
        Split::Test => ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
    }
}

pub fn load_mnist_idx(dir: &Path, split: Split) -> Result<Vec<DatasetRecord>> {
    let (img_name, lbl_name) = file_pair(split);
    let (images, rows, cols) = read_images(&dir.join(img_name))?;
    let labels = read_labels(&dir.join(lbl_name))?;
    if images.len() != labels.len() {
        return Err(DataError::DimensionMismatch {
            images: images.len(),
            labels: labels.len(),
        });
    }
    Ok(images
        .into_iter()
        .zip(labels)
        .map(|(pixels, label)| DatasetRecord {
            image: Tensor::from_vec(&[1, rows, cols], pixels),
            label,
        })
        .collect())
}

fn open(path: &Path) -> Result<Cursor<Vec<u8>>> {
    if !path.exists() {
        return Err(DataError::FileMissing(PathBuf::from(path)));
    }
    Ok(Cursor::new(fs::read(path)?))
}

fn read_images(path: &Path) -> Result<(Vec<Vec<f32>>, usize, usize)> {
    let mut cur = open(path)?;
    let magic = cur.read_u32::<BigEndian>()?;
    if magic != IMAGE_MAGIC {
        return Err(DataError::BadMagic {
            path: PathBuf::from(path),
            got: magic,
            want: IMAGE_MAGIC,
        });
    }
    let count = cur.read_u32::<BigEndian>()? as usize;
    let rows = cur.read_u32::<BigEndian>()? as usize;
    let cols = cur.read_u32::<BigEndian>()? as usize;
    let mut images = Vec::with_capacity(count);
    let mut buf = vec![0u8; rows * cols];
    for _ in 0..count {
        std::io::Read::read_exact(&mut cur, &mut buf)?;
        images.push(buf.iter().map(|b| *b as f32 / 255.0).collect());
    }
    Ok((images, rows, cols))
}

fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let mut cur = open(path)?;
    let magic = cur.read_u32::<BigEndian>()?;
    if magic != LABEL_MAGIC {
        return Err(DataError::BadMagic {
            path: PathBuf::from(path),
            got: magic,
            want: LABEL_MAGIC,
        });
    }
    let count = cur.read_u32::<BigEndian>()? as usize;
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        let label = cur.read_u8()? as usize;
        if label >= CLASSES {
            return Err(DataError::LabelOutOfRange {
                label,
                classes: CLASSES,
            });
        }
        labels.push(label);
    }
    Ok(labels)
}
