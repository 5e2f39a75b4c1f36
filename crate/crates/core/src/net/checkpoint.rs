//! Checkpoint files.
//!
//! ```text
//! "IECK" | version u16
//! config  len u32 | UTF-8 `key = value` text
//! tensors count u32, each: name len u16 | name | rows u32 | cols u32 | rows*cols f32
//! crc32 of every preceding byte
//! ```
//!
//! Batch-norm running statistics are stored as `<layer>.running_mean` and
//! `<layer>.running_var` tensors of one row.

use std::path::Path;

use super::{ModelConfig, ModelParams};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::multigraph::format::{ByteReader, ByteWriter};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"IECK";
pub const CHECKPOINT_VERSION: u16 = 1;

fn put_tensor(w: &mut ByteWriter, name: &str, rows: usize, cols: usize, data: impl Iterator<Item = f32>) {
    w.u16(name.len() as u16);
    w.bytes(name.as_bytes());
    w.u32(rows as u32);
    w.u32(cols as u32);
    data.for_each(|v| w.f32(v));
}

pub fn write_checkpoint(config: &ModelConfig, params: &ModelParams<f32>) -> Vec<u8> {
    let mut w = ByteWriter::default();
    w.bytes(CHECKPOINT_MAGIC);
    w.u16(CHECKPOINT_VERSION);
    let text = config.to_text();
    w.u32(text.len() as u32);
    w.bytes(text.as_bytes());
    w.u32((params.tensors.len() + 2 * params.buffers.len()) as u32);
    for (name, t) in params.names.iter().zip(&params.tensors) {
        put_tensor(&mut w, name, t.rows, t.cols, t.data.iter().copied());
    }
    for (name, mean, var) in &params.buffers {
        put_tensor(&mut w, &format!("{name}.running_mean"), 1, mean.len(), mean.iter().map(|&v| v as f32));
        put_tensor(&mut w, &format!("{name}.running_var"), 1, var.len(), var.iter().map(|&v| v as f32));
    }
    w.crc_from(0);
    w.buf
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<(ModelConfig, ModelParams<f32>)> {
    let mut r = ByteReader::new(bytes);
    r.magic(CHECKPOINT_MAGIC)?;
    let version = r.u16()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(format!("unsupported checkpoint version {version}")));
    }
    let len = r.u32()? as usize;
    let text = std::str::from_utf8(r.take(len)?).map_err(|_| Error::format("config text is not UTF-8"))?;
    let config = ModelConfig::from_text(text)?;
    let count = r.u32()? as usize;
    let mut stored = std::collections::HashMap::new();
    let mut order = Vec::new();
    for _ in 0..count {
        let nlen = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(nlen)?)
            .map_err(|_| Error::format("tensor name is not UTF-8"))?
            .to_string();
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::format(format!("tensor `{name}` is too large")))?;
        r.reserve(len, 4)?;
        let data = (0..len).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
        order.push(name.clone());
        if stored.insert(name.clone(), Tensor { rows, cols, data }).is_some() {
            return Err(Error::format(format!("duplicate tensor `{name}`")));
        }
    }
    r.check_crc(0)?;
    if r.remaining() != 0 {
        return Err(Error::format("trailing bytes after checkpoint"));
    }

    let reference = ModelParams::<f32>::init(&config)?;
    let mut params = ModelParams::empty();
    let mut take = |name: &str, shape: (usize, usize)| -> Result<Tensor<f32>> {
        let t = stored
            .remove(name)
            .ok_or_else(|| Error::format(format!("checkpoint lacks tensor `{name}`")))?;
        if t.shape() != shape {
            return Err(Error::format(format!("tensor `{name}` has shape {:?}, expected {shape:?}", t.shape())));
        }
        Ok(t)
    };
    for ((name, kind), t) in reference.names.iter().zip(&reference.kinds).zip(&reference.tensors) {
        let value = take(name, t.shape())?;
        params.push(name.clone(), *kind, value);
    }
    for (name, mean, _) in &reference.buffers {
        let m = take(&format!("{name}.running_mean"), (1, mean.len()))?;
        let v = take(&format!("{name}.running_var"), (1, mean.len()))?;
        params.push_buffer(name.clone(), m.to_f64(), v.to_f64());
    }
    if let Some(extra) = order.iter().find(|n| stored.contains_key(*n)) {
        return Err(Error::format(format!("unexpected tensor `{extra}`")));
    }
    Ok((config, params))
}

pub fn save_checkpoint(path: &Path, config: &ModelConfig, params: &ModelParams<f32>) -> Result<()> {
    std::fs::write(path, write_checkpoint(config, params))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelConfig, ModelParams<f32>)> {
    read_checkpoint(&std::fs::read(path)?)
}
