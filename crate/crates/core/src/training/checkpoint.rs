//! Checkpoint layout, all integers little endian:
//!
//! ```text
//! b"MRCK" | u32 version | u64 header_len | header JSON | f32 blob
//! ```
//!
//! The header holds the model config, the training task set, the step
//! count and a directory of `(name, offset, dims)` entries. Offsets count
//! f32 elements from the start of the blob. Adam moments, when present,
//! are stored as `adam.m/<param>` and `adam.v/<param>` entries.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::OptimState;
use crate::degradation::MaskSpec;
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};
use crate::numerics::Tensor;

const MAGIC: &[u8; 4] = b"MRCK";
const VERSION: u32 = 1;
const PREFIX: usize = 16;

#[derive(Serialize, Deserialize)]
struct Entry {
    name: String,
    offset: usize,
    dims: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct OptimHeader {
    t: u64,
    counts: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    tasks: Vec<MaskSpec>,
    step: u64,
    tensors: Vec<Entry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    optimizer: Option<OptimHeader>,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: Model<f32>,
    pub optim: Option<OptimState>,
    /// Task set the parameters were trained on.
    pub tasks: Vec<MaskSpec>,
    pub step: u64,
}

pub fn encode_checkpoint(model: &Model<f32>, optim: Option<&OptimState>, tasks: &[MaskSpec], step: u64) -> Result<Vec<u8>> {
    let mut entries = Vec::new();
    let mut blob: Vec<f32> = Vec::new();
    let mut push = |name: String, t: &Tensor<f32>| {
        entries.push(Entry {
            name,
            offset: blob.len(),
            dims: t.dims().to_vec(),
        });
        blob.extend_from_slice(t.data());
    };
    for (name, t) in model.named_params() {
        push(name.to_string(), t);
    }
    if let Some(s) = optim {
        for (i, (m, v)) in s.m.iter().zip(&s.v).enumerate() {
            push(format!("adam.m/{}", model.param_name(i)), m);
            push(format!("adam.v/{}", model.param_name(i)), v);
        }
    }
    let header = Header {
        config: model.config().clone(),
        tasks: tasks.to_vec(),
        step,
        tensors: entries,
        optimizer: optim.map(|s| OptimHeader {
            t: s.t,
            counts: s.counts.clone(),
        }),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(PREFIX + json.len() + 4 * blob.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for x in blob {
        out.extend_from_slice(&x.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let corrupt = |m: &str| Error::CorruptHeader(m.to_string());
    if bytes.len() < PREFIX || &bytes[..4] != MAGIC {
        return Err(corrupt("not a checkpoint (bad magic)"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::CorruptHeader(format!("unsupported checkpoint version {version}")));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let end = usize::try_from(len)
        .ok()
        .and_then(|l| l.checked_add(PREFIX))
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| corrupt("header length runs past end of file"))?;
    let header: Header = serde_json::from_slice(&bytes[PREFIX..end])
        .map_err(|e| Error::CorruptHeader(format!("header JSON: {e}")))?;
    let blob = &bytes[end..];
    if blob.len() % 4 != 0 {
        return Err(corrupt("tensor blob is not a whole number of f32 values"));
    }
    let floats = blob.len() / 4;

    let mut named = Vec::with_capacity(header.tensors.len());
    for e in header.tensors {
        let n = e
            .dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| Error::CorruptHeader(format!("dims of `{}` overflow", e.name)))?;
        if e.offset.checked_add(n).is_none_or(|stop| stop > floats) {
            return Err(Error::CorruptHeader(format!("tensor `{}` lies outside the blob", e.name)));
        }
        let data = blob[4 * e.offset..4 * (e.offset + n)]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let t = Tensor::new(e.dims, data).map_err(|err| Error::CorruptHeader(format!("tensor `{}`: {err}", e.name)))?;
        named.push((e.name, t));
    }

    let (mut m, mut v) = (Vec::new(), Vec::new());
    named.retain(|(name, t)| {
        if let Some(p) = name.strip_prefix("adam.m/") {
            m.push((p.to_string(), t.clone()));
            false
        } else if let Some(p) = name.strip_prefix("adam.v/") {
            v.push((p.to_string(), t.clone()));
            false
        } else {
            true
        }
    });
    let model = Model::from_named(header.config.clone(), named)?;
    let optim = match header.optimizer {
        None => None,
        Some(h) => {
            if h.counts.len() != model.params().len() {
                return Err(corrupt("optimizer step counts do not match the parameter list"));
            }
            // Rebuilding through from_named validates names and dims of the moments too.
            let m = Model::<f32>::from_named(header.config.clone(), m)?;
            let v = Model::<f32>::from_named(header.config.clone(), v)?;
            Some(OptimState {
                t: h.t,
                counts: h.counts,
                m: m.params().to_vec(),
                v: v.params().to_vec(),
            })
        }
    };
    Ok(Checkpoint {
        model,
        optim,
        tasks: header.tasks,
        step: header.step,
    })
}

/// Writes through a temporary sibling and renames, so a crash never leaves
/// a half-written checkpoint under `path`.
pub fn save_checkpoint(model: &Model<f32>, optim: Option<&OptimState>, tasks: &[MaskSpec], step: u64, path: &Path) -> Result<()> {
    let bytes = encode_checkpoint(model, optim, tasks, step)?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    fs::write(&tmp, &bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(format!("renaming into {}", path.display()), e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode_checkpoint(&bytes)
}
