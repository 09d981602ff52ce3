//! Checkpoint persistence.
//!
//! Byte layout (all integers little-endian):
//!
//! ```text
//! magic   b"ODST"
//! u32     format version (currently 1)
//! u32     config length, then that many bytes of ModelConfig JSON
//! u64     training step counter
//! u32     parameter count, then per parameter:
//!           u32 name length + name bytes
//!           u8 rank, then u32 per dimension
//!           f32 LE × numel value blob
//! u32     batch-norm stat count, then per entry:
//!           u32 path length + path bytes
//!           u32 channels, then f32 LE × C running means, f32 LE × C vars
//! ```
//!
//! Parameters are stored in registration order; loading rebuilds the model
//! from the embedded config and requires every name and shape to match, so
//! a round trip reproduces eval-mode logits bitwise.

use crate::error::{DataError, Result};
use resnet_stacks::{Model, ModelConfig};
use std::fs;
use std::path::Path;

const MAGIC: &[u8; 4] = b"ODST";
pub const FORMAT_VERSION: u32 = 1;

pub fn save_checkpoint(model: &Model<f32>, path: &Path) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());

    let config = serde_json::to_vec(model.config()).expect("config serializes");
    buf.extend_from_slice(&(config.len() as u32).to_le_bytes());
    buf.extend_from_slice(&config);
    buf.extend_from_slice(&model.train_steps().to_le_bytes());

    buf.extend_from_slice(&(model.store().len() as u32).to_le_bytes());
    for (_, p) in model.store().iter() {
        buf.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        buf.extend_from_slice(p.name.as_bytes());
        buf.push(p.value.rank() as u8);
        for d in p.value.shape() {
            buf.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        for v in p.value.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    buf.extend_from_slice(&(model.bn_stats().len() as u32).to_le_bytes());
    for stats in model.bn_stats() {
        buf.extend_from_slice(&(stats.path.len() as u32).to_le_bytes());
        buf.extend_from_slice(stats.path.as_bytes());
        buf.extend_from_slice(&(stats.mean.len() as u32).to_le_bytes());
        for v in &stats.mean {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for v in &stats.var {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    fs::write(path, buf)?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(DataError::CorruptBlob(format!(
                "unexpected end of file at byte {}",
                self.pos
            )));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = self.take(4 * n)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| DataError::CorruptBlob("non-utf8 name".into()))
    }
}

/// Rebuilds the model stored at `path`.
pub fn load_checkpoint(path: &Path) -> Result<Model<f32>> {
    if !path.exists() {
        return Err(DataError::FileMissing(path.to_path_buf()));
    }
    let bytes = fs::read(path)?;
    let mut r = Reader {
        buf: &bytes,
        pos: 0,
    };
    if r.take(4)? != MAGIC {
        return Err(DataError::CorruptBlob("bad magic".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(DataError::UnsupportedVersion(version));
    }
    let config_len = r.u32()? as usize;
    let config: ModelConfig = serde_json::from_slice(r.take(config_len)?)
        .map_err(|e| DataError::CorruptBlob(format!("config json: {e}")))?;
    let steps = r.u64()?;

    let mut model = Model::build(&config)?;
    let param_count = r.u32()? as usize;
    if param_count != model.store().len() {
        return Err(DataError::CorruptBlob(format!(
            "{param_count} parameters stored, config defines {}",
            model.store().len()
        )));
    }
    let ids: Vec<_> = model.store().iter().map(|(id, _)| id).collect();
    for id in ids {
        let name = r.string()?;
        let rank = r.u8()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        {
            let p = model.store().get(id);
            if p.name != name || p.value.shape() != shape.as_slice() {
                return Err(DataError::CorruptBlob(format!(
                    "parameter `{name}` {shape:?} does not match config-derived `{}` {:?}",
                    p.name,
                    p.value.shape()
                )));
            }
        }
        let values = r.f32s(shape.iter().product())?;
        model
            .store_mut()
            .get_mut(id)
            .value
            .data_mut()
            .copy_from_slice(&values);
    }

    let stat_count = r.u32()? as usize;
    if stat_count != model.bn_stats().len() {
        return Err(DataError::CorruptBlob(format!(
            "{stat_count} stat entries stored, config defines {}",
            model.bn_stats().len()
        )));
    }
    for i in 0..stat_count {
        let path_name = r.string()?;
        let channels = r.u32()? as usize;
        let mean = r.f32s(channels)?;
        let var = r.f32s(channels)?;
        let slot = &mut model.bn_stats_mut()[i];
        if slot.path != path_name || slot.mean.len() != channels {
            return Err(DataError::CorruptBlob(format!(
                "stat `{path_name}` does not match config-derived `{}`",
                slot.path
            )));
        }
        slot.mean = mean;
        slot.var = var;
    }
    if r.pos != bytes.len() {
        return Err(DataError::CorruptBlob(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    model.set_train_steps(steps);
    Ok(model)
}

/// Loads a checkpoint that must carry exactly `expected` as its config.
pub fn load_checkpoint_expecting(path: &Path, expected: &ModelConfig) -> Result<Model<f32>> {
    let model = load_checkpoint(path)?;
    if model.config() != expected {
        return Err(DataError::ConfigError(format!(
            "checkpoint was built for scheme {:?} depth {}, requested scheme {:?} depth {}",
            model.config().scheme,
            model.config().nominal_depth(),
            expected.scheme,
            expected.nominal_depth()
        )));
    }
    Ok(model)
}
