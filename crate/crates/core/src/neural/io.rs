//! Binary model files.
//!
//! Layout: the magic bytes `HPM1`, a little-endian `u64` header length, a
//! JSON header, then every tensor as little-endian floats in header order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Hyperparams, Model, Vocabularies};
use super::params::{ParamSet, Tensor};
use crate::conllu::TreebankRegistry;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"HPM1";
pub const FORMAT_VERSION: u32 = 1;

/// Storage precision of tensor values.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F64,
    F32,
}

impl Precision {
    fn width(self) -> usize {
        match self {
            Precision::F64 => 8,
            Precision::F32 => 4,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
    dtype: Precision,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    hyperparameters: Hyperparams,
    vocabularies: Vocabularies,
    treebanks: Vec<String>,
    tensors: Vec<TensorEntry>,
}

pub fn model_to_bytes(model: &Model, precision: Precision) -> Result<Vec<u8>> {
    let mut offset = 0;
    let tensors = model
        .params
        .iter()
        .map(|(name, t)| {
            let entry = TensorEntry {
                name: name.to_owned(),
                shape: t.shape.clone(),
                offset,
                dtype: precision,
            };
            offset += t.len() * precision.width();
            entry
        })
        .collect();
    let header = Header {
        format_version: FORMAT_VERSION,
        hyperparameters: model.hyper.clone(),
        vocabularies: model.vocab.clone(),
        treebanks: model.registry.names().to_vec(),
        tensors,
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(12 + json.len() + offset);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, t) in model.params.iter() {
        for &v in &t.values {
            match precision {
                Precision::F64 => out.extend_from_slice(&v.to_le_bytes()),
                Precision::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            }
        }
    }
    Ok(out)
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<Model> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(Error::ModelFormat("missing HPM1 magic".into()));
    }
    let header_len = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
    let body_start = 12usize
        .checked_add(header_len)
        .filter(|&end| end <= bytes.len())
        .ok_or_else(|| Error::ModelFormat("truncated header".into()))?;
    let value: serde_json::Value = serde_json::from_slice(&bytes[12..body_start])
        .map_err(|e| Error::ModelFormat(format!("header is not JSON: {e}")))?;
    match value.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == FORMAT_VERSION as u64 => {}
        Some(v) => return Err(Error::ModelVersion(v.to_string())),
        None => return Err(Error::ModelFormat("header lacks format_version".into())),
    }
    let mut header: Header =
        serde_json::from_value(value).map_err(|e| Error::ModelFormat(e.to_string()))?;
    header.vocabularies.reindex();
    let body = &bytes[body_start..];
    let mut params = ParamSet::new();
    for entry in &header.tensors {
        let len: usize = entry.shape.iter().product();
        let width = entry.dtype.width();
        let data = entry
            .offset
            .checked_add(len * width)
            .and_then(|end| body.get(entry.offset..end))
            .ok_or_else(|| Error::ModelFormat(format!("tensor {} is truncated", entry.name)))?;
        let values = match entry.dtype {
            Precision::F64 => data
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
            Precision::F32 => data
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect(),
        };
        if params.id(&entry.name).is_some() {
            return Err(Error::ModelFormat(format!("duplicate tensor {}", entry.name)));
        }
        params.add(
            &entry.name,
            Tensor {
                shape: entry.shape.clone(),
                values,
            },
        );
    }
    let registry = TreebankRegistry::from_names(&header.treebanks)
        .map_err(|e| Error::ModelFormat(e.to_string()))?;
    Model::from_parts(header.hyperparameters, header.vocabularies, registry, params)
}

/// Writes the model atomically (temporary file, then rename).
pub fn save_model(model: &Model, path: impl AsRef<Path>, precision: Precision) -> Result<()> {
    let bytes = model_to_bytes(model, precision)?;
    crate::util::write_atomic(path.as_ref(), &bytes)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes)
}
