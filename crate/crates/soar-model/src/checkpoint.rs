//! Checkpoint layout: `meta.json` holds the config plus the name/shape
//! table in store (name) order; `params.bin` holds every tensor's values as
//! little-endian f32 in that same order, followed by a CRC32 of the payload.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use soar_grad::Scalar;

use crate::params::{catalog, Param, ParamStore};
use crate::{Model, ModelConfig, ModelError};

pub const META_FILE: &str = "meta.json";
pub const PARAMS_FILE: &str = "params.bin";

#[derive(Serialize, Deserialize)]
struct MetaEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    config: ModelConfig,
    params: Vec<MetaEntry>,
}

pub fn save_checkpoint<S: Scalar>(model: &Model<S>, dir: &Path) -> Result<(), ModelError> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    let mut payload: Vec<u8> = Vec::new();
    for (name, param) in model.store.iter() {
        entries.push(MetaEntry {
            name: name.clone(),
            shape: param.shape.clone(),
        });
        for &v in &param.values {
            payload.extend_from_slice(&(v.to_f64() as f32).to_le_bytes());
        }
    }
    let meta = Meta {
        config: model.config.clone(),
        params: entries,
    };
    fs::write(dir.join(META_FILE), serde_json::to_vec_pretty(&meta)?)?;
    let mut hasher = crc32fast::Hasher::new();
    hasher.update(&payload);
    payload.extend_from_slice(&hasher.finalize().to_le_bytes());
    fs::write(dir.join(PARAMS_FILE), payload)?;
    Ok(())
}

pub fn load_checkpoint<S: Scalar>(dir: &Path) -> Result<Model<S>, ModelError> {
    let meta: Meta = serde_json::from_slice(&fs::read(dir.join(META_FILE))?)?;
    meta.config.validate()?;
    // The stored table must be exactly this config's parameter set.
    let mut expected: Vec<(String, Vec<usize>)> = catalog(&meta.config)
        .into_iter()
        .map(|e| (e.name, e.shape))
        .collect();
    expected.sort_by(|a, b| a.0.cmp(&b.0));
    if meta.params.len() != expected.len() {
        return Err(ModelError::Checkpoint(format!(
            "parameter table has {} entries, config expects {}",
            meta.params.len(),
            expected.len()
        )));
    }
    for (entry, (name, shape)) in meta.params.iter().zip(&expected) {
        if &entry.name != name || &entry.shape != shape {
            return Err(ModelError::Checkpoint(format!(
                "parameter table mismatch at {}: stored {:?}, expected {} {:?}",
                entry.name, entry.shape, name, shape
            )));
        }
    }
    let bytes = fs::read(dir.join(PARAMS_FILE))?;
    let total: usize = expected.iter().map(|(_, s)| s.iter().product::<usize>()).sum();
    if bytes.len() != total * 4 + 4 {
        return Err(ModelError::Checkpoint(format!(
            "params.bin holds {} bytes, expected {}",
            bytes.len(),
            total * 4 + 4
        )));
    }
    let (payload, trailer) = bytes.split_at(total * 4);
    let mut hasher = crc32fast::Hasher::new();
    hasher.update(payload);
    let stored = u32::from_le_bytes(trailer.try_into().unwrap());
    if hasher.finalize() != stored {
        return Err(ModelError::Checkpoint("params.bin checksum mismatch".into()));
    }
    let mut store = ParamStore::init(&meta.config, 0);
    let mut cursor = payload;
    for (name, shape) in &expected {
        let n: usize = shape.iter().product();
        let (chunk, rest) = cursor.split_at(n * 4);
        cursor = rest;
        let values: Vec<S> = chunk
            .chunks_exact(4)
            .map(|b| S::from_f64(f32::from_le_bytes(b.try_into().unwrap()) as f64))
            .collect();
        *store.get_mut(name) = Param {
            shape: shape.clone(),
            values,
        };
    }
    Ok(Model {
        config: meta.config,
        store,
    })
}
