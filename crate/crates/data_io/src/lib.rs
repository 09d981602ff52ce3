//! Dataset ingestion, checkpoint persistence, and metrics logging.
//!
//! Loaders consume every byte of a well-formed file and return a typed
//! error on anything malformed — never a panic or a partial dataset.

#![forbid(unsafe_code)]

mod checkpoint;
mod cifar;
mod dataset;
mod error;
mod metrics;
mod mnist;
mod synth;

pub use checkpoint::{
    load_checkpoint, load_checkpoint_expecting, save_checkpoint, FORMAT_VERSION,
};
pub use cifar::{load_cifar10, load_cifar10_file, RECORD_BYTES};
pub use dataset::{
    normalize_records, random_crop_flip, stack_batch, DatasetRecord, Split, CIFAR_MEAN,
    CIFAR_STD,
};
pub use error::{DataError, Result};
pub use metrics::{append_metrics, format_sig6, MetricsRow, METRICS_HEADER};
pub use mnist::{load_mnist_idx, IMAGE_MAGIC, LABEL_MAGIC};
pub use synth::synth_dataset;
