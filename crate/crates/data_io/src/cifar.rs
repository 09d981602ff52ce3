//! CIFAR-10 binary batches: 3073-byte records, one label byte followed by
//! 3072 channel-major RGB pixel bytes.

use crate::dataset::{DatasetRecord, Split};
use crate::error::{DataError, Result};
use std::fs;
use std::path::{Path, PathBuf};
use tensor_autodiff::Tensor;

pub const RECORD_BYTES: usize = 3073;
const IMAGE_BYTES: usize = 3072;
const CLASSES: usize = 10;

fn batch_files(split: Split) -> &'static [&'static str] {
    match split {
        Split::Train => &[
            "data_batch_1.bin",
            "data_batch_2.bin",
            "data_batch_3.bin",
            "data_batch_4.bin",
            "data_batch_5.bin",
        ],
        Split::Test => &["test_batch.bin"],
    }
}

/// Loads a split from a directory holding the standard binary batch files.
pub fn load_cifar10(dir: &Path, split: Split) -> Result<Vec<DatasetRecord>> {
    let mut records = Vec::new();
    for name in batch_files(split) {
        let path = dir.join(name);
        records.extend(load_cifar10_file(&path)?);
    }
    Ok(records)
}

/// Parses one batch file; every byte is consumed.
pub fn load_cifar10_file(path: &Path) -> Result<Vec<DatasetRecord>> {
    if !path.exists() {
        return Err(DataError::FileMissing(PathBuf::from(path)));
    }
    let bytes = fs::read(path)?;
    if bytes.len() % RECORD_BYTES != 0 {
        return Err(DataError::TruncatedRecord {
            path: PathBuf::from(path),
            size: bytes.len() as u64,
            record: RECORD_BYTES as u64,
        });
    }
    let mut records = Vec::with_capacity(bytes.len() / RECORD_BYTES);
    for chunk in bytes.chunks_exact(RECORD_BYTES) {
        let label = chunk[0] as usize;
        if label >= CLASSES {
            return Err(DataError::LabelOutOfRange {
                label,
                classes: CLASSES,
            });
        }
        let pixels: Vec<f32> = chunk[1..=IMAGE_BYTES]
            .iter()
            .map(|b| *b as f32 / 255.0)
            .collect();
        records.push(DatasetRecord {
            image: Tensor::from_vec(&[3, 32, 32], pixels),
            label,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_records(path: &Path, n: usize, label: u8) {
        let mut f = fs::File::create(path).unwrap();
        for i in 0..n {
            let mut rec = vec![0u8; RECORD_BYTES];
            rec[0] = label;
            rec[1] = (i % 256) as u8;
            f.write_all(&rec).unwrap();
        }
    }

    #[test]
    fn one_record_file_yields_one_record() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("test_batch.bin");
        write_records(&path, 1, 7);
        let recs = load_cifar10_file(&path).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].label, 7);
        assert_eq!(recs[0].image.shape(), &[3, 32, 32]);
    }

    #[test]
    fn off_by_one_length_is_truncated_record() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("test_batch.bin");
        fs::write(&path, vec![0u8; RECORD_BYTES + 1]).unwrap();
        assert!(matches!(
            load_cifar10_file(&path),
            Err(DataError::TruncatedRecord { .. })
        ));
    }

    #[test]
    fn missing_file_is_typed() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_cifar10(dir.path(), Split::Test),
            Err(DataError::FileMissing(_))
        ));
    }

    #[test]
    fn bad_label_is_typed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("test_batch.bin");
        write_records(&path, 1, 11);
        assert!(matches!(
            load_cifar10_file(&path),
            Err(DataError::LabelOutOfRange { label: 11, .. })
        ));
    }

    #[test]
    fn pixels_scale_to_unit_interval() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("test_batch.bin");
        let mut rec = vec![255u8; RECORD_BYTES];
        rec[0] = 0;
        fs::write(&path, rec).unwrap();
        let recs = load_cifar10_file(&path).unwrap();
        assert!(recs[0].image.data().iter().all(|v| *v == 1.0));
    }
}
