//! Checkpoint file format.
//!
//! Layout: magic `CNET`, version u32, header length u32, JSON header
//! (model config, training metadata, tensor directory with name/shape/
//! byte offset), then contiguous little-endian `f32` payloads in
//! directory order. Reload reproduces bit-identical parameters.

use crate::autodiff::Tensor;
use crate::model::config::ModelConfig;
use crate::model::params::{Checkpoint, ParamStore, TrainMeta};
use crate::model::ModelError;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;
use thiserror::Error;

const MAGIC: &[u8; 4] = b"CNET";
const VERSION: u32 = 1;

#[derive(Error, Debug)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic: expected CNET")]
    BadMagic,
    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt header: {0}")]
    BadHeader(String),
    #[error("tensor {name}: offset {offset} + {len} bytes exceeds payload of {payload} bytes")]
    OutOfBounds {
        name: String,
        offset: u64,
        len: u64,
        payload: u64,
    },
    #[error("tensor {a} overlaps tensor {b}")]
    Overlap { a: String, b: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    meta: TrainMeta,
    tensors: Vec<TensorEntry>,
}

/// Serializes a checkpoint to bytes. Deterministic for identical inputs.
pub fn checkpoint_bytes(ckpt: &Checkpoint) -> Result<Vec<u8>, CheckpointError> {
    let mut entries = Vec::with_capacity(ckpt.params.len());
    let mut offset = 0u64;
    for (name, tensor) in ckpt.params.iter() {
        entries.push(TensorEntry {
            name: name.to_string(),
            shape: tensor.shape().to_vec(),
            offset,
        });
        offset += 4 * tensor.numel() as u64;
    }
    let header = Header {
        config: ckpt.config.clone(),
        meta: ckpt.meta.clone(),
        tensors: entries,
    };
    let header_json =
        serde_json::to_vec(&header).map_err(|e| CheckpointError::BadHeader(e.to_string()))?;

    let mut out = Vec::with_capacity(12 + header_json.len() + offset as usize);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_json);
    for (_, tensor) in ckpt.params.iter() {
        for &v in tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn parse_checkpoint(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    if bytes.len() < 12 || &bytes[0..4] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]);
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let header_len = u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize;
    if bytes.len() < 12 + header_len {
        return Err(CheckpointError::BadHeader(format!(
            "declared {header_len} header bytes, {} available",
            bytes.len() - 12
        )));
    }
    let header: Header = serde_json::from_slice(&bytes[12..12 + header_len])
        .map_err(|e| CheckpointError::BadHeader(e.to_string()))?;
    let payload = &bytes[12 + header_len..];

    // bounds and overlap validation over the directory
    let mut spans: Vec<(u64, u64, &str)> = Vec::with_capacity(header.tensors.len());
    for e in &header.tensors {
        let len = 4 * e.shape.iter().product::<usize>() as u64;
        if e.offset + len > payload.len() as u64 {
            return Err(CheckpointError::OutOfBounds {
                name: e.name.clone(),
                offset: e.offset,
                len,
                payload: payload.len() as u64,
            });
        }
        spans.push((e.offset, e.offset + len, &e.name));
    }
    let mut sorted = spans.clone();
    sorted.sort_by_key(|s| s.0);
    for pair in sorted.windows(2) {
        if pair[0].1 > pair[1].0 {
            return Err(CheckpointError::Overlap {
                a: pair[0].2.to_string(),
                b: pair[1].2.to_string(),
            });
        }
    }

    let mut params = ParamStore::new();
    for e in &header.tensors {
        let numel: usize = e.shape.iter().product();
        let start = e.offset as usize;
        let data: Vec<f32> = (0..numel)
            .map(|i| {
                let p = start + 4 * i;
                f32::from_le_bytes([payload[p], payload[p + 1], payload[p + 2], payload[p + 3]])
            })
            .collect();
        params.push(
            e.name.clone(),
            Tensor::new(e.shape.clone(), data)
                .map_err(|err| CheckpointError::BadHeader(err.to_string()))?,
        );
    }

    let ckpt = Checkpoint {
        config: header.config,
        params,
        meta: header.meta,
    };
    ckpt.validate()?;
    Ok(ckpt)
}

pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<(), CheckpointError> {
    fs::write(path, checkpoint_bytes(ckpt)?)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    parse_checkpoint(&fs::read(path)?)
}
