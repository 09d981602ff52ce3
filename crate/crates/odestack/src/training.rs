//! Deterministic SGD-momentum training over the configured dataset.

use crate::error::{CliError, Result};
use crate::run_config::{DatasetKind, RunConfig};
use data_io::{
    append_metrics, load_cifar10, load_mnist_idx, normalize_records, random_crop_flip,
    save_checkpoint, stack_batch, synth_dataset, DatasetRecord, MetricsRow, Split, CIFAR_MEAN,
    CIFAR_STD,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use resnet_stacks::Model;
use std::path::PathBuf;
use std::time::Instant;
use tensor_autodiff::{ParamId, ParamStore, Tensor};

const MNIST_MEAN: [f32; 1] = [0.1307];
const MNIST_STD: [f32; 1] = [0.3081];

/// SGD with momentum and L2 weight decay folded into the gradient.
pub struct SgdMomentum {
    momentum: f32,
    weight_decay: f32,
    velocity: Vec<Tensor<f32>>,
}

impl SgdMomentum {
    pub fn new(store: &ParamStore<f32>, momentum: f64, weight_decay: f64) -> Self {
        Self {
            momentum: momentum as f32,
            weight_decay: weight_decay as f32,
            velocity: store
                .iter()
                .map(|(_, p)| Tensor::zeros(p.value.shape()))
                .collect(),
        }
    }

    pub fn step(&mut self, store: &mut ParamStore<f32>, lr: f64) {
        let lr = lr as f32;
        for i in 0..self.velocity.len() {
            let p = store.get_mut(ParamId(i));
            let value = p.value.data_mut();
            let grad = &p.grad;
            for (j, v) in self.velocity[i].data_mut().iter_mut().enumerate() {
                let g = grad.data()[j] + self.weight_decay * value[j];
                *v = self.momentum * *v + g;
                value[j] -= lr * *v;
            }
        }
    }
}

/// Loads one split per the config's dataset section, applying the optional
/// normalization.
pub fn load_split(cfg: &RunConfig, split: Split) -> Result<Vec<DatasetRecord>> {
    let ds = &cfg.dataset;
    let mut records = match ds.kind {
        DatasetKind::Synth => {
            let n = match split {
                Split::Train => ds.train_n,
                Split::Test => ds.test_n,
            };
            synth_dataset(ds.synth_seed(cfg.seed, split), n, ds.classes, ds.size)
        }
        DatasetKind::Cifar10 => load_cifar10(ds.path.as_deref().expect("validated"), split)?,
        DatasetKind::Mnist => load_mnist_idx(ds.path.as_deref().expect("validated"), split)?,
    };
    if ds.normalize {
        match ds.kind {
            DatasetKind::Mnist => normalize_records(&mut records, &MNIST_MEAN, &MNIST_STD),
            _ => normalize_records(&mut records, &CIFAR_MEAN, &CIFAR_STD),
        }
    }
    Ok(records)
}

fn count_correct(logits: &Tensor<f32>, labels: &[usize]) -> usize {
    let classes = logits.numel() / labels.len();
    labels
        .iter()
        .enumerate()
        .filter(|(i, label)| {
            let row = &logits.data()[i * classes..(i + 1) * classes];
            let mut best = 0;
            for (j, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = j;
                }
            }
            best == **label
        })
        .count()
}

/// Mean eval-mode loss and accuracy over a whole split.
pub fn evaluate(
    model: &Model<f32>,
    records: &[DatasetRecord],
    batch_size: usize,
) -> Result<(f64, f64)> {
    if records.is_empty() {
        return Err(CliError::runtime("evaluation split is empty"));
    }
    let indices: Vec<usize> = (0..records.len()).collect();
    let mut loss_sum = 0.0;
    let mut correct = 0;
    for chunk in indices.chunks(batch_size) {
        let (batch, labels) = stack_batch(records, chunk);
        let (mut tape, logits) = model.forward_eval(&batch)?;
        let loss = tape.softmax_cross_entropy(logits, &labels)?;
        loss_sum += tape.value(loss).scalar_value() as f64 * labels.len() as f64;
        correct += count_correct(tape.value(logits), &labels);
    }
    Ok((
        loss_sum / records.len() as f64,
        correct as f64 / records.len() as f64,
    ))
}

#[derive(Debug, Clone, Copy)]
pub struct EpochRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_loss: f64,
    pub test_acc: f64,
    pub lr: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub rows: Vec<EpochRow>,
    pub param_count: usize,
    pub metrics_path: PathBuf,
    pub final_checkpoint: PathBuf,
    pub best_checkpoint: PathBuf,
}

/// Trains per the run config; fully deterministic under a fixed seed in
/// single-threaded mode. Appends one train and one test metrics row per
/// epoch and writes final plus best-accuracy checkpoints.
pub fn run_training(cfg: &RunConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let train = load_split(cfg, Split::Train)?;
    let test = load_split(cfg, Split::Test)?;
    if train.is_empty() {
        return Err(CliError::runtime("training split is empty"));
    }

    let model_cfg = cfg.model_config()?;
    if model_cfg.in_channels != cfg.dataset.channels() {
        return Err(CliError::runtime(format!(
            "model expects {} input channels, dataset provides {}",
            model_cfg.in_channels,
            cfg.dataset.channels()
        )));
    }
    if model_cfg.classes != cfg.dataset.class_count() {
        return Err(CliError::runtime(format!(
            "model has {} classes, dataset provides {}",
            model_cfg.classes,
            cfg.dataset.class_count()
        )));
    }

    let mut model: Model<f32> = Model::build(&model_cfg)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let metrics_path = cfg.out_dir.join("metrics.csv");
    if metrics_path.exists() {
        std::fs::remove_file(&metrics_path)?;
    }
    let final_checkpoint = cfg.out_dir.join("final.ckpt");
    let best_checkpoint = cfg.out_dir.join("best.ckpt");

    let mut opt = SgdMomentum::new(
        model.store(),
        cfg.optimizer.momentum,
        cfg.optimizer.weight_decay,
    );
    // Distinct stream from parameter init: shuffling and augmentation only.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut best_acc = f64::NEG_INFINITY;
    let mut rows = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let lr = cfg.schedule.lr_at(cfg.optimizer.lr, epoch);
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut correct = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let (batch, labels) = if cfg.dataset.augment {
                let views: Vec<DatasetRecord> = chunk
                    .iter()
                    .map(|&i| DatasetRecord {
                        image: random_crop_flip(&train[i].image, 4, &mut rng),
                        label: train[i].label,
                    })
                    .collect();
                stack_batch(&views, &(0..views.len()).collect::<Vec<_>>())
            } else {
                stack_batch(&train, chunk)
            };
            model.store_mut().zero_grads();
            let (mut tape, logits) = model.forward_train(&batch)?;
            let loss = tape.softmax_cross_entropy(logits, &labels)?;
            loss_sum += tape.value(loss).scalar_value() as f64 * labels.len() as f64;
            correct += count_correct(tape.value(logits), &labels);
            tape.backward(loss, model.store_mut())?;
            opt.step(model.store_mut(), lr);
            model.add_train_steps(1);
        }
        let train_loss = loss_sum / train.len() as f64;
        let train_acc = correct as f64 / train.len() as f64;
        let (test_loss, test_acc) = evaluate(&model, &test, cfg.batch_size)?;

        let wall_s = if cfg.deterministic_timing {
            0.0
        } else {
            started.elapsed().as_secs_f64()
        };
        for (split, loss, accuracy) in [
            (Split::Train, train_loss, train_acc),
            (Split::Test, test_loss, test_acc),
        ] {
            append_metrics(
                &metrics_path,
                &MetricsRow {
                    epoch,
                    split,
                    loss,
                    accuracy,
                    lr,
                    wall_s,
                },
            )?;
        }
        if test_acc > best_acc {
            best_acc = test_acc;
            save_checkpoint(&model, &best_checkpoint)?;
        }
        rows.push(EpochRow {
            epoch,
            train_loss,
            train_acc,
            test_loss,
            test_acc,
            lr,
        });
    }
    save_checkpoint(&model, &final_checkpoint)?;

    Ok(TrainOutcome {
        rows,
        param_count: model.param_count(),
        metrics_path,
        final_checkpoint,
        best_checkpoint,
    })
}
